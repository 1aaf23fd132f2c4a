#pragma once

#include "acm/image.hpp"
#include "acm/mser.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace acm {

/// Axis-aligned square given by an exact (possibly half-integer) center.
struct SquareSpec {
    double cx = 0.0;
    double cy = 0.0;
    int side = 0;
};

/// One inflated square crop of a region, with its 28x28 patch.
struct Proposal {
    int region_ref = 0;    // index into the source region list
    double center_x = 0.0; // base-image pixels, equals the region bbox center
    double center_y = 0.0;
    int base_side = 0;     // max(bbox.w, bbox.h), floored at 4
    int side = 0;          // inflated side, rounded, >= 4
    double inflation = 1.0; // area factor: 1.0, 1.3 or 1.6
    Rect crop_rect;        // the inflated square actually sampled
    Rect label_rect;       // the inflation-1.0 square, used for IoU labeling
    GrayImage patch;       // 28x28
};

struct TrainSample {
    GrayImage patch; // 28x28
    int label = 0;   // 1 vehicle, 0 background
    double rotation = 0.0;
    int image_id = 0;
    int proposal_id = 0;
};

/// Center of the region's base bbox and the enclosing square side max(w,h).
SquareSpec squarify(const ExtremalRegion& region);

/// The three area inflations {x1.0, x1.3, x1.6}: sides are
/// round(base * sqrt(factor)), floored at 4. Requires base.side >= 4.
std::array<SquareSpec, 3> inflate_set(const SquareSpec& base);

/// Integer rect of a square spec; corner rounds to nearest, so the rect
/// center stays within half a pixel of the exact center.
Rect square_rect(const SquareSpec& s);

/// Three proposals per region (one per inflation). Regions whose
/// inflation-1.0 square misses the image entirely are dropped. Patches are
/// bilinear 28x28 resamples with black fill outside the image.
std::vector<Proposal> make_proposals(const std::vector<ExtremalRegion>& regions,
                                     const GrayImage& img);

/// Labeled sample mining. Positives: proposals whose label_rect has
/// IoU > 0.5 with some ground-truth box. Negatives: proposals with IoU == 0
/// against every box, subsampled to the positive count (when negatives are
/// the scarcer pool, positives are subsampled down instead, keeping the
/// counts equal). Each selected proposal contributes its unrotated patch
/// plus 4 random-rotation copies (angles uniform in [-pi/4, pi/4], sampled
/// from the stream derived from (seed, image_id)). Throws MiningError when
/// either pool is empty.
std::vector<TrainSample> mine_training_set(const GrayImage& img, int image_id,
                                           const std::vector<Proposal>& proposals,
                                           const std::vector<Rect>& gt, std::uint64_t seed);

/// Directory of numbered 28x28 PGMs plus manifest.jsonl lines
/// {path, label, rotation, image, proposal}.
void save_training_set(const std::vector<TrainSample>& samples, const std::string& dir);
std::vector<TrainSample> load_training_set(const std::string& dir);

} // namespace acm
