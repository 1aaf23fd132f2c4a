#pragma once

#include "acm/image.hpp"
#include "acm/roughseg.hpp"

#include <array>
#include <string>
#include <utility>
#include <vector>

namespace acm {

struct BlobFeatures {
    double mean_intensity = 0.0; // [0,255], over the blob's own pixels
    double std_intensity = 0.0;  // population
    double fill_ratio = 0.0;     // blob area / bbox area, (0,1]
};

enum class BlobClass { Vehicle, Background };

/// Triangular membership: 0 outside [a,c], 1 at b, linear on both slopes.
/// Zero-width slopes evaluate membership 1 at the shared point.
struct Triangle {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;

    double eval(double x) const;
};

/// One triangle per class per feature, fitted from class percentiles.
/// feature_names lists the active subset in canonical order; inactive
/// features do not participate in classification.
struct FuzzyModel {
    static constexpr std::array<const char*, 3> kAllFeatures{"mean", "std", "fill"};

    int version = 1;
    std::vector<std::string> feature_names{"mean", "std", "fill"};
    std::array<Triangle, 3> vehicle{};    // indexed mean, std, fill
    std::array<Triangle, 3> background{};

    void validate() const;
};

struct SoftLabel {
    double mu_vehicle = 0.0;
    double mu_background = 0.0;
    BlobClass hard = BlobClass::Background; // ties go to background
};

/// Recomputes intensity stats over blob.pixels from map; fill ratio is
/// copied from the blob. Empty blob is a parameter error.
BlobFeatures features(const Blob& blob, const GrayImage& map);

/// Per class and feature: triangle (5th percentile, median, 95th percentile)
/// with linear-interpolated ranks p/100*(n-1). An all-equal feature widens
/// to (v-1, v, v+1). Needs >= 5 samples per class.
FuzzyModel train_fuzzy(const std::vector<std::pair<BlobFeatures, BlobClass>>& labeled,
                       const std::vector<std::string>& feature_names = {"mean", "std",
                                                                        "fill"});

/// Min t-norm over the active features, argmax hard label.
SoftLabel classify(const FuzzyModel& model, const BlobFeatures& f);

/// RGB copy of img with bbox outlines: green for vehicle, red for background.
RgbImage annotate(const GrayImage& img, const std::vector<Blob>& blobs,
                  const std::vector<SoftLabel>& labels);

void save_fuzzy(const FuzzyModel& model, const std::string& path);
FuzzyModel load_fuzzy(const std::string& path);

} // namespace acm
