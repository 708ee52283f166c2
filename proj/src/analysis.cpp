#include "nsm/analysis.hpp"

#include "nsm/parallel.hpp"
#include "nsm/rt_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace nsm {

double mse(const Tensor<float>& img, const Tensor<float>& ref, const std::vector<std::uint8_t>& covered)
{
    require_same_shape(img.shape(), ref.shape(), "mse");
    const std::size_t plane = img.rank() == 3 ? img.plane() : img.size();
    if (!covered.empty() && covered.size() != plane)
        throw ShapeError("mse: coverage mask has " + std::to_string(covered.size()) + " entries for " +
                         std::to_string(plane) + " pixels");
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < img.size(); ++i) {
        if (!covered.empty() && !covered[i % plane]) continue;
        const double d = static_cast<double>(img[i]) - static_cast<double>(ref[i]);
        sum += d * d;
        ++n;
    }
    if (n == 0) throw std::invalid_argument("mse: no covered pixels");
    return sum / static_cast<double>(n);
}

// ---- channel sensitivity -------------------------------------------------

std::vector<double> relative_sensitivity(const std::vector<double>& absolute)
{
    const double total = std::accumulate(absolute.begin(), absolute.end(), 0.0);
    if (!(total > 0.0)) throw std::domain_error("all channel sensitivities are zero");
    std::vector<double> out;
    out.reserve(absolute.size());
    for (double s : absolute) out.push_back(s / total);
    return out;
}

SensitivityReport channel_sensitivity(const ChannelModel& model, const std::vector<Tensor<float>>& inputs,
                                      const std::vector<std::vector<std::uint8_t>>& covered,
                                      const std::vector<std::string>& names, const SensitivityConfig& cfg)
{
    if (inputs.empty()) throw std::invalid_argument("channel_sensitivity needs at least one frame");
    if (cfg.repeats < 1) throw std::invalid_argument("repeats must be >= 1");
    if (!(cfg.noise_scale > 0.0)) throw std::invalid_argument("noise_scale must be > 0");
    if (!covered.empty() && covered.size() != inputs.size())
        throw std::invalid_argument("one coverage mask per frame expected");
    const std::size_t channels = inputs[0].channels();
    if (names.size() != channels) throw std::invalid_argument("one name per channel expected");
    for (const auto& x : inputs) require_same_shape(x.shape(), inputs[0].shape(), "channel_sensitivity input");
    const std::size_t plane = inputs[0].plane();
    auto is_covered = [&](std::size_t f, std::size_t i) {
        return covered.empty() || covered[f].empty() || covered[f][i] != 0;
    };

    SensitivityReport r;
    r.names = names;
    r.samples = inputs.size();
    r.repeats = cfg.repeats;
    r.sigma.assign(channels, 0.0);
    for (std::size_t c = 0; c < channels; ++c) {
        double sum = 0.0;
        std::size_t n = 0;
        for (std::size_t f = 0; f < inputs.size(); ++f)
            for (std::size_t i = 0; i < plane; ++i)
                if (is_covered(f, i)) {
                    sum += inputs[f].channel(c)[i];
                    ++n;
                }
        if (n == 0) throw std::invalid_argument("channel_sensitivity: no covered pixels");
        const double mean = sum / static_cast<double>(n);
        double var = 0.0;
        for (std::size_t f = 0; f < inputs.size(); ++f)
            for (std::size_t i = 0; i < plane; ++i)
                if (is_covered(f, i)) {
                    const double d = inputs[f].channel(c)[i] - mean;
                    var += d * d;
                }
        r.sigma[c] = std::sqrt(var / static_cast<double>(n));
        if (!(r.sigma[c] > 0.0)) throw std::domain_error("channel '" + names[c] + "' has zero variance");
        r.pixels = n;
    }

    std::vector<Tensor<float>> base(inputs.size());
    for (std::size_t f = 0; f < inputs.size(); ++f) base[f] = model(inputs[f]);

    const std::size_t frames = inputs.size();
    const std::size_t reps = static_cast<std::size_t>(cfg.repeats);
    std::vector<double> job_sum(channels * reps * frames, 0.0);
    parallel_for(0, job_sum.size(), [&](std::size_t job) {
        const std::size_t c = job / (reps * frames);
        const std::size_t rep = (job / frames) % reps;
        const std::size_t f = job % frames;
        const double step = cfg.noise_scale * r.sigma[c];
        // keyed by name so reordering channels reorders the report exactly
        std::mt19937_64 rng(stream_seed(cfg.seed ^ fnv1a(names[c]), rep, f));
        std::normal_distribution<double> noise(0.0, step);
        Tensor<float> x = inputs[f];
        auto ch = x.channel(c);
        for (std::size_t i = 0; i < plane; ++i)
            if (is_covered(f, i)) ch[i] = static_cast<float>(ch[i] + noise(rng));
        const Tensor<float> y = model(x);
        double acc = 0.0;
        for (std::size_t i = 0; i < plane; ++i)
            if (is_covered(f, i)) acc += std::abs(static_cast<double>(y[i]) - static_cast<double>(base[f][i]));
        job_sum[job] = acc / step;
    });

    r.absolute.assign(channels, 0.0);
    for (std::size_t c = 0; c < channels; ++c) {
        double acc = 0.0;
        for (std::size_t j = 0; j < reps * frames; ++j) acc += job_sum[c * reps * frames + j];
        r.absolute[c] = acc / (static_cast<double>(reps) * static_cast<double>(r.pixels));
    }
    r.relative = relative_sensitivity(r.absolute);
    return r;
}

void write_sensitivity_csv(const std::string& path, const SensitivityReport& r)
{
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    f.precision(17);
    f << "channel,absolute,relative,sigma\n";
    for (std::size_t i = 0; i < r.names.size(); ++i)
        f << r.names[i] << ',' << r.absolute[i] << ',' << r.relative[i] << ',' << r.sigma[i] << '\n';
}

std::string format_sensitivity(const SensitivityReport& r)
{
    std::ostringstream s;
    s << "sensitivity over " << r.samples << " frames, " << r.repeats << " repeats\n";
    for (std::size_t i = 0; i < r.names.size(); ++i)
        s << "  " << std::left << std::setw(8) << r.names[i] << std::right << std::fixed << std::setprecision(6)
          << " S=" << r.absolute[i] << "  s=" << std::setprecision(2) << 100.0 * r.relative[i] << "%\n";
    return s.str();
}

// ---- feature selection ---------------------------------------------------

SelectionResult select_features(const CandidateTrainer& trainer, std::vector<std::string> initial,
                                std::vector<std::string> pool, const SelectionConfig& cfg)
{
    if (initial.empty()) throw std::invalid_argument("select_features needs at least one starting channel");
    if (cfg.threshold < 0.0 || cfg.tie_margin < 0.0) throw std::invalid_argument("threshold and tie_margin must be >= 0");
    SelectionResult out;
    std::vector<std::string> current = std::move(initial);
    std::size_t next = 0;
    for (int round = 1; round <= cfg.max_rounds; ++round) {
        const CandidateEvaluation ev = trainer(current);
        if (ev.sensitivity.relative.size() != current.size())
            throw std::runtime_error("trainer reported " + std::to_string(ev.sensitivity.relative.size()) +
                                     " sensitivities for " + std::to_string(current.size()) + " channels");
        SelectionRound rec;
        rec.round = round;
        rec.channels = current;
        rec.relative = ev.sensitivity.relative;
        rec.heldout_mse = ev.heldout_mse;

        std::vector<std::string> kept;
        std::vector<std::string> ties;
        for (std::size_t i = 0; i < current.size(); ++i) {
            const double s = ev.sensitivity.relative[i];
            if (s < cfg.threshold)
                rec.dropped.push_back(current[i]);
            else {
                kept.push_back(current[i]);
                if (s < cfg.threshold + cfg.tie_margin) ties.push_back(current[i]);
            }
        }
        double reference = ev.heldout_mse;
        for (const auto& c : ties) {
            std::vector<std::string> without;
            for (const auto& k : kept)
                if (k != c) without.push_back(k);
            if (without.empty()) continue;
            const double m = trainer(without).heldout_mse;
            if (m <= reference) {
                rec.tie_dropped.push_back(c);
                kept = std::move(without);
                reference = m;
            }
        }
        if (kept.empty()) throw std::runtime_error("feature selection dropped every channel");
        for (int a = 0; a < cfg.add_per_round && next < pool.size(); ++next) {
            if (std::find(kept.begin(), kept.end(), pool[next]) != kept.end()) continue;
            kept.push_back(pool[next]);
            rec.added.push_back(pool[next]);
            ++a;
        }
        const bool settled = rec.dropped.empty() && rec.tie_dropped.empty() && rec.added.empty();
        out.audit.push_back(rec);
        current = std::move(kept);
        if (settled) break;
    }
    out.selected = current;
    return out;
}

std::string format_selection(const SelectionResult& r)
{
    std::ostringstream s;
    auto list = [](const std::vector<std::string>& v) {
        std::string o;
        for (const auto& x : v) o += (o.empty() ? "" : " ") + x;
        return o.empty() ? std::string("-") : o;
    };
    for (const auto& round : r.audit) {
        s << "round " << round.round << " mse=" << std::setprecision(6) << round.heldout_mse << '\n';
        for (std::size_t i = 0; i < round.channels.size(); ++i)
            s << "  " << std::left << std::setw(8) << round.channels[i] << std::right << std::fixed
              << std::setprecision(2) << 100.0 * round.relative[i] << "%\n" << std::defaultfloat;
        s << "  dropped: " << list(round.dropped) << "\n  tie-dropped: " << list(round.tie_dropped)
          << "\n  added: " << list(round.added) << '\n';
    }
    s << "selected: " << list(r.selected) << '\n';
    return s.str();
}

// ---- penumbra model ------------------------------------------------------

PenumbraExtents penumbra_extents(double z_min, double z_max, double z_f, double r_e)
{
    if (!(z_min > 0.0 && z_min <= z_max && z_max < z_f))
        throw std::domain_error("penumbra_extents requires 0 < z_min <= z_max < z_f");
    if (!(r_e >= 0.0)) throw std::domain_error("penumbra_extents requires r_e >= 0");
    const double z_m = 0.5 * (z_max + z_min);
    const double r_s = 0.5 * (z_max - z_min);
    const double reach = std::sqrt(z_m * z_m + r_e * r_e);
    if (r_s > reach) throw std::domain_error("occluder radius exceeds its distance");
    const double spread = std::asin(r_s / reach);
    const double bq = r_e * (z_f - z_m) / z_m;
    const double theta = std::atan((bq + r_e) / z_f);
    PenumbraExtents e;
    e.inner = z_f * std::tan(theta - spread) - r_e;
    e.outer = z_f * std::tan(theta + spread) - r_e;
    return e;
}

OccluderRange occluder_range(const Scene& scene, const Vec3& emitter_center)
{
    OccluderRange r{kInf, 0.0};
    for (const auto& p : scene.objects()) {
        if (!is_occluder(p)) continue;
        const auto [c, radius] = bounding_sphere(p);
        const double d = (c - emitter_center).norm();
        r.z_min = std::min(r.z_min, std::max(d - radius, 1e-6));
        r.z_max = std::max(r.z_max, d + radius);
    }
    if (!std::isfinite(r.z_min)) return {0.0, 0.0};
    return r;
}

PenumbraFrame penumbra_frame(const GBuffer& g, const Scene& scene)
{
    PenumbraFrame f;
    f.depth = g.depth;
    f.z_f = g.z_f;
    f.covered = g.covered;
    f.focal_px = g.camera.focal_px();
    f.emitter_radius = scene.emitter().radius();
    f.range = occluder_range(scene, g.emitter_center);
    return f;
}

double percentile(std::vector<double> values, double q)
{
    if (values.empty()) return 0.0;
    if (!(q > 0.0 && q <= 1.0)) throw std::invalid_argument("percentile q must lie in (0, 1]");
    const std::size_t rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(values.size())));
    const std::size_t k = std::clamp<std::size_t>(rank, 1, values.size()) - 1;
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k), values.end());
    return values[k];
}

PenumbraStats penumbra_histogram(const std::vector<PenumbraFrame>& frames, double bin_width)
{
    if (!(bin_width > 0.0)) throw std::invalid_argument("bin_width must be > 0");
    PenumbraStats s;
    s.bin_width = bin_width;
    for (const auto& f : frames) {
        s.ranges.push_back(f.range);
        const bool has_occluder = f.range.z_max > 0.0;
        for (std::size_t i = 0; i < f.covered.size(); ++i) {
            if (!f.covered[i]) continue;
            if (!has_occluder || !(f.z_f[i] > f.range.z_max)) {
                ++s.skipped;
                continue;
            }
            const double world = penumbra_extents(f.range.z_min, f.range.z_max, f.z_f[i], f.emitter_radius).total();
            s.widths.push_back(std::max(0.0, world) * f.focal_px / f.depth[i]);
        }
    }
    for (double w : s.widths) s.max_width = std::max(s.max_width, w);
    s.histogram.assign(static_cast<std::size_t>(std::floor(s.max_width / bin_width)) + 1, 0);
    for (double w : s.widths) ++s.histogram[static_cast<std::size_t>(std::floor(w / bin_width))];
    s.p95 = percentile(s.widths, 0.95);
    return s;
}

void write_histogram_csv(const std::string& path, const PenumbraStats& s)
{
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << "bin_left,count\n";
    for (std::size_t i = 0; i < s.histogram.size(); ++i) f << static_cast<double>(i) * s.bin_width << ',' << s.histogram[i] << '\n';
}

TransitionProfile measure_transition(const Scene& scene, const Vec3& origin, const Vec3& direction,
                                     const Vec3& normal, double length, int count, int spp, std::uint64_t seed,
                                     double lo, double hi)
{
    if (count < 2) throw std::invalid_argument("measure_transition needs at least two points");
    TransitionProfile p;
    p.positions.resize(static_cast<std::size_t>(count));
    p.visibility.resize(static_cast<std::size_t>(count));
    const Vec3 dir = direction.normalized();
    const double eps = 1e-4 * scene.diagonal();
    const Emitter& e = scene.emitter();
    parallel_for(0, static_cast<std::size_t>(count), [&](std::size_t i) {
        const double s = length * static_cast<double>(i) / static_cast<double>(count - 1);
        std::mt19937_64 rng(stream_seed(seed, i, 0));
        p.positions[i] = s;
        p.visibility[i] = point_visibility(scene, origin + s * dir, normal, e.center, e.radius(), spp, eps, rng);
    });
    for (std::size_t i = 0; i < p.positions.size(); ++i) {
        if (!(p.visibility[i] > lo && p.visibility[i] < hi)) continue;
        if (!p.found) p.band_start = p.positions[i];
        p.band_end = p.positions[i];
        p.found = true;
    }
    return p;
}

// ---- temporal instability ------------------------------------------------

template <class T>
TemporalReport temporal_instability(const std::vector<Tensor<T>>& frames, const std::vector<MotionField>& motion,
                                    double alpha_t)
{
    if (frames.size() < 2) throw std::invalid_argument("temporal_instability needs at least two frames");
    if (motion.size() != frames.size() - 1) throw std::invalid_argument("one motion field per frame after the first expected");
    const int h = static_cast<int>(frames[0].height()), w = static_cast<int>(frames[0].width());
    for (const auto& f : frames) require_same_shape(f.shape(), frames[0].shape(), "temporal_instability frame");
    TemporalReport r;
    r.alpha_t = alpha_t;
    r.frames = static_cast<int>(frames.size());
    double sum = 0.0;
    std::size_t total = 0;
    for (std::size_t t = 1; t < frames.size(); ++t) {
        const MotionField& m = motion[t - 1];
        if (m.height != h || m.width != w) throw ShapeError("motion field resolution differs from the frames");
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                ++total;
                const std::size_t i = static_cast<std::size_t>(y) * w + x;
                if (!m.valid[i]) continue;
                const int qx = static_cast<int>(std::floor(x + 0.5 + m.vec[i].x()));
                const int qy = static_cast<int>(std::floor(y + 0.5 + m.vec[i].y()));
                if (qx < 0 || qy < 0 || qx >= w || qy >= h) continue;
                const double d = std::abs(static_cast<double>(frames[t].at(0, y, x)) -
                                          static_cast<double>(frames[t - 1].at(0, qy, qx)));
                sum += std::expm1(alpha_t * d);
                ++r.valid_pixels;
            }
    }
    if (r.valid_pixels == 0) throw std::domain_error("temporal_instability: no valid pixels");
    r.instability = sum / static_cast<double>(r.valid_pixels);
    r.rejected_fraction = 1.0 - static_cast<double>(r.valid_pixels) / static_cast<double>(total);
    return r;
}

template TemporalReport temporal_instability(const std::vector<Tensor<float>>&, const std::vector<MotionField>&,
                                             double);
template TemporalReport temporal_instability(const std::vector<Tensor<double>>&, const std::vector<MotionField>&,
                                             double);

} // namespace nsm
