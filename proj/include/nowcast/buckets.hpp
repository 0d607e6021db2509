#pragma once

#include <string>
#include <vector>

#include "nowcast/tensor.hpp"

namespace nowcast {

// Rainfall-intensity class scale. Intervals are left-open / right-closed:
// class 0 covers [0, b0], class k covers (b[k-1], b[k]], the top class is
// open-ended. K = boundaries.size() + 1.
struct BucketScale {
    std::string name;
    std::vector<double> boundaries;       // ascending, mm/h
    std::vector<double> representatives;  // one per class, mm/h
    std::vector<double> weights;          // one per class, > 0

    int num_classes() const { return static_cast<int>(boundaries.size()) + 1; }
    void validate() const;

    std::string to_json() const;
    static BucketScale from_json(const std::string& text);
    void save(const std::string& path) const;
    static BucketScale load(const std::string& path);
};

// Per-class observation counts or frequencies.
struct ClassHistogram {
    std::vector<double> frequency;
    void validate() const;
};

// "mmh": the default intensity scale with unit class weights.
// "mmh_w": same boundaries with inverse-frequency weights from the reference
// validation histogram.
BucketScale make_scale(const std::string& name);

// Reference rainfall distribution (percent per class) used by "mmh_w".
ClassHistogram reference_histogram();

int bucketize(double rain, const BucketScale& scale);
TensorT<int> bucketize_grid(const Tensor& rain, const BucketScale& scale);

// w_k = 1 / max(freq_k, epsilon), normalized so the mean weight is 1.
std::vector<double> class_weights(const ClassHistogram& hist, double epsilon = 1e-6);

// Probability-weighted sum of class representatives.
double decode_expected_value(const std::vector<double>& probs, const BucketScale& scale);

// Probability of rain rate above `threshold`: full mass of classes entirely
// above it plus a linear fraction of the class containing it. The open top
// class is treated as ending at the next log-spaced boundary for the
// interpolation, consistent with its representative value.
double exceedance_probability(const std::vector<double>& probs, double threshold,
                              const BucketScale& scale);

}  // namespace nowcast
