#pragma once

#include "nsm/adam.hpp"
#include "nsm/autodiff.hpp"
#include "nsm/shadow_net.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace nsm {

/// Fixed-weight multi-scale feature pyramid used by the perceptual loss term.
class PerceptualExtractor {
public:
    virtual ~PerceptualExtractor() = default;
    virtual std::string id() const = 0;
    /// Feature maps of a (1, H, W) image, one Var per scale.
    virtual std::vector<Var> features(Graph<float>& g, Var img) const = 0;
    virtual std::vector<Var> features(Graph<double>& g, Var img) const = 0;
};

/// Eight 3x3 oriented first-derivative kernels (four orientations, both signs)
/// applied at full and half resolution, edges replicated, followed by ReLU.
/// Every kernel sums to zero, so flat regions produce no response.
class EdgeBankExtractor final : public PerceptualExtractor {
public:
    static constexpr const char* kId = "dog8-v1";
    static constexpr int kKernels = 8;
    static constexpr int kScales = 2;

    std::string id() const override { return kId; }
    std::vector<Var> features(Graph<float>& g, Var img) const override;
    std::vector<Var> features(Graph<double>& g, Var img) const override;

    /// (8, 1, 3, 3). Kernel 0 responds to a dark-to-bright step along +x
    /// (a vertical edge), kernel 2 along +y, kernels 4 and 6 to the diagonals;
    /// odd kernels are the negated copies.
    static Tensor<double> bank();
};

/// Throws std::invalid_argument for unknown ids.
std::shared_ptr<const PerceptualExtractor> make_extractor(const std::string& id);

struct LossConfig {
    double alpha = 0.9;
    int p = 3;
    std::string perceptual = EdgeBankExtractor::kId;
    std::vector<double> layer_weights{1.0, 1.0}; // one per extractor scale

    void validate() const;
};

template <class T>
struct LossTerms {
    Var total;
    T l1 = 0;
    T perceptual = 0;
};

/// alpha * mean|y - t| + (1 - alpha) * weighted mean over scales of mean|phi(y) - phi(t)|.
template <class T>
LossTerms<T> supervised_loss(Graph<T>& g, Var y, Var target, const LossConfig& cfg, const PerceptualExtractor& ext);

/// supervised(x0, target) + sum_i supervised(x0, x_i). The x_i enter as detached
/// copies, so no gradient reaches whatever produced them.
template <class T>
LossTerms<T> perturbation_loss(Graph<T>& g, Var x0, const std::vector<Var>& perturbed, Var target, const LossConfig& cfg,
                               const PerceptualExtractor& ext);

/// Scalar supervised loss between two (1, H, W) images.
double supervised_loss_value(const Tensor<float>& y, const Tensor<float>& target, const LossConfig& cfg);

/// One frame: the unperturbed feature stack first, then the perturbed ones, and
/// the target traced for the unperturbed state.
struct TrainingSample {
    std::string id;
    std::vector<Tensor<float>> inputs;
    Tensor<float> target;
    std::vector<std::uint8_t> covered;
    double size_index = 0.0;
};

struct TrainConfig {
    int steps = 1000;
    std::uint64_t seed = 1;
    AdamConfig adam;
    double final_lr_fraction = 1.0; // cosine decay of the learning rate to this fraction; 1 keeps it constant
    double eval_probability = 0.01;
    int keep_best = 3;
    bool deterministic = false;
    std::string log_path; // CSV metrics log; empty disables the file

    void validate() const;
};

struct MetricsRow {
    int step = 0;
    double loss = 0.0;
    double l1 = 0.0;
    double perceptual = 0.0;
    std::optional<double> heldout_mse;
    double wallclock_s = 0.0;
};

struct TrainResult {
    NetworkWeights weights;
    std::vector<MetricsRow> log;
    double train_mse = 0.0;   // of the returned weights over the training set
    double heldout_mse = 0.0; // of the returned weights over the held-out set
    int selected_step = 0;
    long forward_passes = 0;
};

class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Adam on the perturbation loss, visiting the training set in a fresh seeded
/// order every epoch. After each step the held-out MSE is evaluated with
/// probability eval_probability (and always after the last step); the best
/// keep_best snapshots are retained and the one with the lowest training-set MSE
/// is returned. An empty held-out set evaluates on the training set.
/// Throws TrainingError when the loss becomes non-finite.
TrainResult train(const std::vector<TrainingSample>& train_set, const std::vector<TrainingSample>& heldout,
                  const NetworkConfig& net, const NetworkWeights& initial, const LossConfig& loss,
                  const TrainConfig& cfg);

/// Mean covered-pixel MSE of the network over a set of samples (unperturbed inputs).
double evaluate_mse(const NetworkWeights& w, const NetworkConfig& net, const std::vector<TrainingSample>& samples);

void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows);

} // namespace nsm
