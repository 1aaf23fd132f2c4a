#pragma once

#include "acm/image.hpp"
#include "acm/mser.hpp"

#include <vector>

namespace acm::testsupport {

/// Reference extremal-region enumerator for small images. Sweeps every
/// threshold 0..255, labels connected components by breadth-first search,
/// groups identical pixel sets into tree nodes across thresholds, and
/// evaluates the stability score straight from the labeled stacks. It honors
/// the same definitional contract as the production detector (documented in
/// acm/mser.hpp) while sharing none of its machinery: no union-find, no
/// incremental areas, no ancestor walking.
std::vector<ExtremalRegion> mser_reference(const GrayImage& img, const MserConfig& cfg);

} // namespace acm::testsupport
