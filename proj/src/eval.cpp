#include "nowcast/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "nowcast/plot.hpp"

namespace nowcast {

ConfusionCounts::ConfusionCounts(std::vector<double> taus, int leads)
    : thresholds(std::move(taus)), lead_count(leads) {
    if (thresholds.empty() || leads < 1) throw DataError("confusion: empty strata");
    for (std::size_t i = 0; i + 1 < thresholds.size(); ++i)
        if (!(thresholds[i] < thresholds[i + 1]))
            throw DataError("confusion: thresholds must be ascending");
    if (thresholds.front() <= 0.0) throw DataError("confusion: thresholds must be positive");
    cells.assign(thresholds.size() * static_cast<std::size_t>(leads), Cell{});
}

ConfusionCounts::Cell& ConfusionCounts::at(std::size_t ti, int lead) {
    return cells[ti * static_cast<std::size_t>(lead_count) + static_cast<std::size_t>(lead)];
}
const ConfusionCounts::Cell& ConfusionCounts::at(std::size_t ti, int lead) const {
    return cells[ti * static_cast<std::size_t>(lead_count) + static_cast<std::size_t>(lead)];
}

void ConfusionCounts::merge(const ConfusionCounts& other) {
    if (thresholds != other.thresholds || lead_count != other.lead_count)
        throw DataError("confusion merge: strata mismatch");
    for (std::size_t i = 0; i < cells.size(); ++i) {
        cells[i].tp += other.cells[i].tp;
        cells[i].fp += other.cells[i].fp;
        cells[i].fn += other.cells[i].fn;
        cells[i].tn += other.cells[i].tn;
    }
}

void accumulate(ConfusionCounts& counts, const Tensor& pred_rates, const Tensor& target_rates,
                const Mask& valid) {
    if (!pred_rates.same_shape(target_rates) || pred_rates.shape() != valid.shape())
        throw DataError("accumulate: shape mismatch between prediction, target and mask");
    if (pred_rates.rank() != 3 || pred_rates.dim(0) > counts.lead_count)
        throw DataError("accumulate: lead dimension exceeds counter strata");
    const long t_out = pred_rates.dim(0);
    const long hw = pred_rates.dim(1) * pred_rates.dim(2);
    for (std::size_t ti = 0; ti < counts.thresholds.size(); ++ti) {
        const float tau = static_cast<float>(counts.thresholds[ti]);
        for (long t = 0; t < t_out; ++t) {
            const float* p = pred_rates.data() + t * hw;
            const float* y = target_rates.data() + t * hw;
            const std::uint8_t* m = valid.data() + t * hw;
            std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
            for (long i = 0; i < hw; ++i) {
                if (!m[i]) continue;
                const bool pe = p[i] > tau;
                const bool ye = y[i] > tau;
                tp += pe && ye;
                fp += pe && !ye;
                fn += !pe && ye;
                tn += !pe && !ye;
            }
            auto& c = counts.at(ti, static_cast<int>(t));
            c.tp += tp;
            c.fp += fp;
            c.fn += fn;
            c.tn += tn;
        }
    }
}

CsiReport csi(const ConfusionCounts& counts) {
    CsiReport r;
    r.thresholds = counts.thresholds;
    r.lead_count = counts.lead_count;
    r.counts = counts;
    r.csi.assign(counts.cells.size(), std::numeric_limits<double>::quiet_NaN());
    r.csi_by_threshold.assign(counts.thresholds.size(), std::numeric_limits<double>::quiet_NaN());

    for (std::size_t ti = 0; ti < counts.thresholds.size(); ++ti) {
        std::int64_t tp_sum = 0, fp_sum = 0, fn_sum = 0;
        for (int lead = 0; lead < counts.lead_count; ++lead) {
            const auto& c = counts.at(ti, lead);
            const std::int64_t denom = c.tp + c.fp + c.fn;
            if (denom > 0)
                r.csi[ti * static_cast<std::size_t>(counts.lead_count) +
                      static_cast<std::size_t>(lead)] = double(c.tp) / double(denom);
            tp_sum += c.tp;
            fp_sum += c.fp;
            fn_sum += c.fn;
        }
        const std::int64_t denom = tp_sum + fp_sum + fn_sum;
        if (denom > 0) r.csi_by_threshold[ti] = double(tp_sum) / double(denom);
    }

    double sum = 0.0;
    int defined = 0;
    for (double v : r.csi_by_threshold)
        if (!std::isnan(v)) {
            sum += v;
            ++defined;
        }
    r.mean_csi = defined > 0 ? sum / defined : std::numeric_limits<double>::quiet_NaN();
    return r;
}

BaselineKind baseline_from_name(const std::string& name) {
    if (name == "zero") return BaselineKind::zero;
    if (name == "sat_threshold") return BaselineKind::sat_threshold;
    throw DataError("unknown baseline '" + name + "'");
}

namespace {

// Inverted-brightness channel (cold tops read low) on the central crop of the
// last input slot, upsampled to the label grid.
Tensor brightness_plane(const SampleRecord& sample, const Geometry& geom) {
    const long channel = std::min<long>(kBaselineChannel, sample.input.dim(1) - 1);
    const long t_last = sample.input.dim(0) - 1;
    const long in = sample.input.dim(2);
    Tensor plane({1, 1, in, in});
    for (long i = 0; i < in * in; ++i)
        plane[static_cast<std::size_t>(i)] =
            sample.input[sample.input.flat(t_last, channel, i / in, i % in)];
    Tensor cropped = nn::crop_center(plane, geom.crop);
    return nn::upsample_nearest(cropped, geom.sr_factor);
}

}  // namespace

float calibrate_sat_threshold(const SampleProvider& next, const Geometry& geom, double quantile) {
    std::vector<float> values;
    SampleRecord sample;
    while (next(sample)) {
        Tensor up = brightness_plane(sample, geom);
        values.insert(values.end(), up.data(), up.data() + up.size());
    }
    if (values.empty()) throw DataError("calibrate_sat_threshold: no samples");
    std::size_t n = static_cast<std::size_t>(quantile * double(values.size() - 1));
    std::nth_element(values.begin(), values.begin() + static_cast<long>(n), values.end());
    return values[n];
}

Tensor baseline_forecast(const SampleRecord& sample, BaselineKind kind, const Geometry& geom,
                         float brightness_cut) {
    Tensor rates({geom.out_len, geom.patch, geom.patch});
    if (kind == BaselineKind::zero) return rates;

    Tensor up = brightness_plane(sample, geom);
    const long hw = geom.patch * geom.patch;
    for (long t = 0; t < geom.out_len; ++t)
        for (long i = 0; i < hw; ++i)
            rates[static_cast<std::size_t>(t * hw + i)] =
                up[static_cast<std::size_t>(i)] < brightness_cut ? kBaselineRate : 0.0f;
    return rates;
}

CsiReport evaluate_forecaster(const SampleProvider& next, const Forecaster& forecast,
                              const std::vector<double>& thresholds, int lead_count) {
    ConfusionCounts counts(thresholds, lead_count);
    SampleRecord sample;
    while (next(sample)) {
        Tensor rates = forecast(sample);
        accumulate(counts, rates, sample.target, sample.target_valid);
    }
    return csi(counts);
}

CsiReport evaluate_model(Model& model, const BucketScale& scale, const NormalizationStats& stats,
                         const SampleProvider& next, const std::vector<double>& thresholds) {
    const Geometry& geom = model.config().geom;
    return evaluate_forecaster(
        next,
        [&](const SampleRecord& sample) {
            SampleRecord s = sample;
            normalize(s, stats);
            ForecastTensor f = predict(model, s);
            return decode_rates(f, scale);
        },
        thresholds, geom.out_len);
}

void emit_report(const CsiReport& report, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const fs::path dir(out_dir);

    std::ofstream out(dir / "metrics.tsv");
    if (!out) throw DataError("cannot write metrics file in " + out_dir);
    out << "threshold\tlead_time\ttp\tfp\tfn\ttn\tcsi\n";
    char buf[200];
    for (std::size_t ti = 0; ti < report.thresholds.size(); ++ti)
        for (int lead = 0; lead < report.lead_count; ++lead) {
            const auto& c = report.counts.at(ti, lead);
            const double v = report.csi_at(ti, lead);
            if (std::isnan(v))
                std::snprintf(buf, sizeof buf, "%.9g\t%d\t%lld\t%lld\t%lld\t%lld\tundef\n",
                              report.thresholds[ti], lead + 1, static_cast<long long>(c.tp),
                              static_cast<long long>(c.fp), static_cast<long long>(c.fn),
                              static_cast<long long>(c.tn));
            else
                std::snprintf(buf, sizeof buf, "%.9g\t%d\t%lld\t%lld\t%lld\t%lld\t%.9g\n",
                              report.thresholds[ti], lead + 1, static_cast<long long>(c.tp),
                              static_cast<long long>(c.fp), static_cast<long long>(c.fn),
                              static_cast<long long>(c.tn), v);
            out << buf;
        }
    out.close();

    for (std::size_t ti = 0; ti < report.thresholds.size(); ++ti) {
        std::vector<double> ys(static_cast<std::size_t>(report.lead_count));
        for (int lead = 0; lead < report.lead_count; ++lead)
            ys[static_cast<std::size_t>(lead)] = report.csi_at(ti, lead);
        char name[64], caption[64];
        std::snprintf(name, sizeof name, "csi_tau_%g.png", report.thresholds[ti]);
        std::snprintf(caption, sizeof caption, "csi tau=%g", report.thresholds[ti]);
        write_line_chart_png((dir / name).string(), ys, 0.0, 1.0, caption);
    }
}

CsiReport load_report(const std::string& metrics_path) {
    std::ifstream in(metrics_path);
    if (!in) throw DataError("cannot read metrics file: " + metrics_path);
    std::string line;
    std::getline(in, line);  // header
    struct Row {
        double tau;
        int lead;
        ConfusionCounts::Cell cell;
    };
    std::vector<Row> rows;
    std::vector<double> taus;
    int max_lead = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        Row r{};
        std::string csi_text;
        long long tp, fp, fn, tn;
        if (!(ss >> r.tau >> r.lead >> tp >> fp >> fn >> tn >> csi_text))
            throw DataError("metrics file: bad row '" + line + "'");
        r.cell = {tp, fp, fn, tn};
        rows.push_back(r);
        if (taus.empty() || taus.back() != r.tau) taus.push_back(r.tau);
        max_lead = std::max(max_lead, r.lead);
    }
    ConfusionCounts counts(taus, max_lead);
    for (const auto& r : rows) {
        std::size_t ti =
            static_cast<std::size_t>(std::find(taus.begin(), taus.end(), r.tau) - taus.begin());
        counts.at(ti, r.lead - 1) = r.cell;
    }
    return csi(counts);
}

}  // namespace nowcast
