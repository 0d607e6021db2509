#include "nowcast/buckets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "json.hpp"

namespace nowcast {

namespace {

const std::vector<double> kDefaultBoundaries = {0.08, 0.16, 0.25, 0.40, 0.63, 1.0,  1.6,
                                                2.5,  4.0,  6.3,  10.0, 16.0, 25.0, 40.0};

// Observation percentages for the default scale's classes, dry to extreme.
const std::vector<double> kReferencePercent = {88.05, 3.57, 1.71, 1.60, 1.53, 1.34, 1.00, 0.61,
                                               0.35,  0.15, 0.06, 0.02, 0.01, 0.00, 0.00};

// The default boundaries follow the 1.0/1.6/2.5/4.0/6.3/10 decade ladder, so
// the open top class continues it with a virtual upper edge of 63.
constexpr double kDefaultTopEdge = 63.0;

// Representatives: 0 for the dry class, geometric mean of the interval
// endpoints elsewhere, including the virtual edge for the top class.
std::vector<double> geometric_representatives(const std::vector<double>& b, double top_edge) {
    std::vector<double> reps;
    reps.reserve(b.size() + 1);
    reps.push_back(0.0);
    for (std::size_t k = 1; k < b.size(); ++k) reps.push_back(std::sqrt(b[k - 1] * b[k]));
    reps.push_back(std::sqrt(b.back() * top_edge));
    return reps;
}

// Invert the geometric-mean rule so the interpolation edge matches whatever
// representative the scale carries.
double top_class_virtual_edge(const BucketScale& s) {
    double rep = s.representatives.back();
    double lo = s.boundaries.back();
    return std::max(rep * rep / lo, lo * (1.0 + 1e-9));
}

}  // namespace

void BucketScale::validate() const {
    if (boundaries.empty()) throw DataError("bucket scale: no boundaries");
    for (std::size_t i = 0; i + 1 < boundaries.size(); ++i)
        if (!(boundaries[i] < boundaries[i + 1]))
            throw DataError("bucket scale: boundaries must be strictly increasing");
    if (boundaries.front() <= 0.0) throw DataError("bucket scale: boundaries must be positive");
    const std::size_t k = boundaries.size() + 1;
    if (representatives.size() != k) throw DataError("bucket scale: representative count != K");
    if (weights.size() != k) throw DataError("bucket scale: weight count != K");
    for (double w : weights)
        if (!(w > 0.0)) throw DataError("bucket scale: weights must be positive");
    for (std::size_t i = 0; i < k; ++i) {
        double lo = (i == 0) ? 0.0 : boundaries[i - 1];
        double hi = (i + 1 == k) ? std::numeric_limits<double>::infinity() : boundaries[i];
        bool ok = (i == 0) ? (representatives[i] >= 0.0 && representatives[i] <= hi)
                           : (representatives[i] > lo && representatives[i] <= hi);
        if (!ok) throw DataError("bucket scale: representative outside its class range");
    }
}

void ClassHistogram::validate() const {
    if (frequency.empty()) throw DataError("class histogram: empty");
    bool any = false;
    for (double f : frequency) {
        if (f < 0.0) throw DataError("class histogram: negative entry");
        any = any || f > 0.0;
    }
    if (!any) throw DataError("class histogram: all entries zero");
}

ClassHistogram reference_histogram() { return ClassHistogram{kReferencePercent}; }

BucketScale make_scale(const std::string& name) {
    BucketScale s;
    s.name = name;
    s.boundaries = kDefaultBoundaries;
    s.representatives = geometric_representatives(s.boundaries, kDefaultTopEdge);
    if (name == "mmh") {
        s.weights.assign(s.boundaries.size() + 1, 1.0);
    } else if (name == "mmh_w") {
        s.weights = class_weights(reference_histogram());
    } else {
        throw DataError("unknown bucket scale '" + name + "'");
    }
    s.validate();
    return s;
}

int bucketize(double rain, const BucketScale& scale) {
    if (rain < 0.0) throw DataError("bucketize: negative rain rate");
    // class index = number of boundaries strictly below the value, which
    // yields [0,b0], (b[k-1],b[k]], (b_last,inf).
    auto it = std::lower_bound(scale.boundaries.begin(), scale.boundaries.end(), rain);
    return static_cast<int>(it - scale.boundaries.begin());
}

TensorT<int> bucketize_grid(const Tensor& rain, const BucketScale& scale) {
    TensorT<int> out(rain.shape());
    for (std::size_t i = 0; i < rain.size(); ++i) out[i] = bucketize(rain[i], scale);
    return out;
}

std::vector<double> class_weights(const ClassHistogram& hist, double epsilon) {
    hist.validate();
    double total = 0.0;
    for (double f : hist.frequency) total += f;
    std::vector<double> w(hist.frequency.size());
    double sum = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
        w[k] = 1.0 / std::max(hist.frequency[k] / total, epsilon);
        sum += w[k];
    }
    double mean = sum / static_cast<double>(w.size());
    for (double& x : w) x /= mean;
    return w;
}

double decode_expected_value(const std::vector<double>& probs, const BucketScale& scale) {
    if (probs.size() != static_cast<std::size_t>(scale.num_classes()))
        throw DataError("decode: probability vector length != K");
    double sum = 0.0;
    for (double p : probs) {
        if (p < 0.0) throw DataError("decode: negative probability");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-5) throw DataError("decode: probabilities do not sum to 1");
    double rate = 0.0;
    for (std::size_t k = 0; k < probs.size(); ++k) rate += probs[k] * scale.representatives[k];
    return rate;
}

double exceedance_probability(const std::vector<double>& probs, double threshold,
                              const BucketScale& scale) {
    if (!(threshold > 0.0)) throw DataError("exceedance: threshold must be positive");
    if (probs.size() != static_cast<std::size_t>(scale.num_classes()))
        throw DataError("exceedance: probability vector length != K");
    const auto& b = scale.boundaries;
    const int k_max = scale.num_classes();
    double p = 0.0;
    for (int k = 0; k < k_max; ++k) {
        double lo = (k == 0) ? 0.0 : b[k - 1];
        double hi = (k == k_max - 1) ? top_class_virtual_edge(scale) : b[k];
        if (threshold <= lo) {
            p += probs[k];
        } else if (threshold < hi) {
            p += probs[k] * (hi - threshold) / (hi - lo);
        }
    }
    return p;
}

std::string BucketScale::to_json() const {
    nlohmann::json j;
    j["name"] = name;
    j["boundaries"] = boundaries;
    j["representatives"] = representatives;
    j["weights"] = weights;
    return j.dump(2);
}

BucketScale BucketScale::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    BucketScale s;
    s.name = j.at("name").get<std::string>();
    s.boundaries = j.at("boundaries").get<std::vector<double>>();
    s.representatives = j.at("representatives").get<std::vector<double>>();
    s.weights = j.at("weights").get<std::vector<double>>();
    s.validate();
    return s;
}

void BucketScale::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write bucket scale file: " + path);
    out << to_json() << "\n";
}

BucketScale BucketScale::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read bucket scale file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_json(text);
}

}  // namespace nowcast
