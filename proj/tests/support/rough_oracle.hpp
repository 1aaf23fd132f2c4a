#pragma once

#include "acm/image.hpp"
#include "acm/roughseg.hpp"

namespace acm::testing {

/// Exhaustive evaluator of the rough-entropy table, written independently of
/// the production sweep: granulates on its own, and for every threshold
/// classifies each granule by inspecting its four pixels as object/background
/// sets directly. Shares only the final formula shape with the contract.
RoughTable rough_reference(const GrayImage& acm, RoughnessForm form = RoughnessForm::Standard);

} // namespace acm::testing
