#include "bpad/neuralnet.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>

#include "bpad/error.hpp"
#include "json.hpp"

namespace bpad {

// ---------------------------------------------------------------------------
// Network

Network Network::zeros(const std::vector<std::size_t>& sizes) {
  if (sizes.size() < 2) throw ConfigError("a network needs at least two layer sizes");
  Network net;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    Layer layer;
    layer.weights = Matrix::Zero(static_cast<Eigen::Index>(sizes[l + 1]), static_cast<Eigen::Index>(sizes[l]));
    layer.bias = Vector::Zero(static_cast<Eigen::Index>(sizes[l + 1]));
    layer.activation = l + 2 == sizes.size() ? Activation::Linear : Activation::Relu;
    net.layers.push_back(std::move(layer));
  }
  return net;
}

Network Network::glorot(const std::vector<std::size_t>& sizes, Rng& rng) {
  Network net = zeros(sizes);
  for (auto& layer : net.layers) {
    const double fan = static_cast<double>(layer.weights.rows() + layer.weights.cols());
    const double limit = std::sqrt(6.0 / fan);
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Eigen::Index i = 0; i < layer.weights.size(); ++i) layer.weights.data()[i] = dist(rng);
  }
  return net;
}

std::vector<std::size_t> Network::sizes() const {
  std::vector<std::size_t> s;
  s.push_back(input_width());
  for (const auto& l : layers) s.push_back(static_cast<std::size_t>(l.weights.rows()));
  return s;
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
  return n;
}

bool Network::operator==(const Network& other) const {
  if (layers.size() != other.layers.size()) return false;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& a = layers[l];
    const auto& b = other.layers[l];
    if (a.activation != b.activation || a.weights.rows() != b.weights.rows() ||
        a.weights.cols() != b.weights.cols() || a.weights != b.weights || a.bias != b.bias) {
      return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Forward / backward

ForwardCache forward(const Network& net, const Matrix& input, Mode mode, const Regularization& reg, Rng& rng) {
  if (static_cast<std::size_t>(input.cols()) != net.input_width()) {
    throw DataError("forward: input width " + std::to_string(input.cols()) + ", network expects " +
                    std::to_string(net.input_width()));
  }
  const bool train = mode == Mode::Train;
  ForwardCache cache;
  Matrix x = input;
  if (train && reg.noise_sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, reg.noise_sigma);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] += noise(rng);
  }
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& layer = net.layers[l];
    Matrix z = x * layer.weights.transpose();
    z.rowwise() += layer.bias.transpose();
    cache.inputs.push_back(std::move(x));
    if (layer.activation == Activation::Relu) {
      x = z.cwiseMax(0.0);
      if (train && reg.dropout_rate > 0.0) {
        const double keep = 1.0 - reg.dropout_rate;
        std::bernoulli_distribution draw(keep);
        Matrix mask(x.rows(), x.cols());
        for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = draw(rng) ? 1.0 / keep : 0.0;
        x = x.cwiseProduct(mask);
        cache.dropout_masks.push_back(std::move(mask));
      } else {
        cache.dropout_masks.emplace_back();
      }
    } else {
      x = z;
      cache.dropout_masks.emplace_back();
    }
    cache.pre_activations.push_back(std::move(z));
  }
  cache.output = std::move(x);
  return cache;
}

Matrix infer(const Network& net, const Matrix& input) {
  Rng unused(0);
  return forward(net, input, Mode::Infer, {}, unused).output;
}

double mse_loss(const Matrix& output, const Matrix& target) {
  if (output.rows() != target.rows() || output.cols() != target.cols()) throw DataError("mse_loss: shape mismatch");
  return (output - target).squaredNorm() / static_cast<double>(output.size());
}

Gradients backward(const Network& net, const ForwardCache& cache, const Matrix& target) {
  const auto& out = cache.output;
  if (out.rows() != target.rows() || out.cols() != target.cols()) throw DataError("backward: target shape mismatch");
  const std::size_t n = net.layers.size();
  Gradients g;
  g.weights.resize(n);
  g.bias.resize(n);
  Matrix delta = (out - target) * (2.0 / static_cast<double>(out.size()));
  for (std::size_t l = n; l-- > 0;) {
    const auto& layer = net.layers[l];
    if (layer.activation == Activation::Relu) {
      if (cache.dropout_masks[l].size() != 0) delta = delta.cwiseProduct(cache.dropout_masks[l]);
      delta = delta.cwiseProduct((cache.pre_activations[l].array() > 0.0).cast<double>().matrix());
    }
    g.weights[l] = delta.transpose() * cache.inputs[l];
    g.bias[l] = delta.colwise().sum().transpose();
    if (l > 0) delta = delta * layer.weights;
  }
  return g;
}

// ---------------------------------------------------------------------------
// Adam

void adam_update(std::span<double> params, std::span<const double> grads, std::span<double> m, std::span<double> v,
                 std::uint64_t t, const AdamParams& p) {
  if (t == 0) throw ConfigError("adam: step count starts at 1");
  const double c1 = 1.0 - std::pow(p.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(p.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double gi = grads[i];
    m[i] = p.beta1 * m[i] + (1.0 - p.beta1) * gi;
    v[i] = p.beta2 * v[i] + (1.0 - p.beta2) * gi * gi;
    const double m_hat = m[i] / c1;
    const double v_hat = v[i] / c2;
    params[i] -= p.lr * m_hat / (std::sqrt(v_hat) + p.epsilon);
  }
}

AdamState AdamState::for_network(const Network& net) {
  AdamState s;
  for (const auto& l : net.layers) {
    s.m_w.push_back(Matrix::Zero(l.weights.rows(), l.weights.cols()));
    s.v_w.push_back(Matrix::Zero(l.weights.rows(), l.weights.cols()));
    s.m_b.push_back(Vector::Zero(l.bias.size()));
    s.v_b.push_back(Vector::Zero(l.bias.size()));
  }
  return s;
}

void adam_step(Network& net, const Gradients& grads, AdamState& state, const AdamParams& p) {
  ++state.t;
  auto span_of = [](auto& m) { return std::span<double>(m.data(), static_cast<std::size_t>(m.size())); };
  auto cspan_of = [](const auto& m) {
    return std::span<const double>(m.data(), static_cast<std::size_t>(m.size()));
  };
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    adam_update(span_of(net.layers[l].weights), cspan_of(grads.weights[l]), span_of(state.m_w[l]),
                span_of(state.v_w[l]), state.t, p);
    adam_update(span_of(net.layers[l].bias), cspan_of(grads.bias[l]), span_of(state.m_b[l]), span_of(state.v_b[l]),
                state.t, p);
  }
}

// ---------------------------------------------------------------------------
// Training

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("train.batch_size must be positive");
  if (max_epochs == 0) throw ConfigError("train.max_epochs must be positive");
  if (!(lr > 0.0)) throw ConfigError("train.lr must be positive");
  if (!(lr_factor > 0.0 && lr_factor <= 1.0)) throw ConfigError("train.lr_factor must lie in (0, 1]");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("train.beta1/beta2 must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw ConfigError("train.epsilon must be positive");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("train.dropout_rate must lie in [0, 1)");
  if (!(noise_sigma >= 0.0)) throw ConfigError("train.noise_sigma must be non-negative");
  if (!(hidden_size_ratio > 0.0)) throw ConfigError("train.hidden_size_ratio must be positive");
  if (n_hidden_layers == 0) throw ConfigError("train.n_hidden_layers must be positive");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("train.validation_fraction must lie in (0, 1)");
  }
}

std::vector<std::size_t> hidden_sizes(std::size_t input_width, const TrainConfig& cfg) {
  const auto h = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(static_cast<double>(input_width) * cfg.hidden_size_ratio)));
  return std::vector<std::size_t>(cfg.n_hidden_layers, h);
}

std::vector<TraceErrors> reconstruction_errors(const Network& net, const EncodedBatch& batch,
                                               const EncodingLayout& layout) {
  if (static_cast<std::size_t>(batch.data.cols()) != layout.total_width()) {
    throw DataError("reconstruction_errors: batch width does not match layout");
  }
  const Matrix out = infer(net, batch.data);
  const std::size_t width = layout.total_width();
  const std::size_t spe = layout.slots_per_event();
  std::vector<TraceErrors> errors;
  errors.reserve(batch.rows());
  for (std::size_t r = 0; r < batch.rows(); ++r) {
    const auto se = slot_errors(std::span<const double>(batch.data.row(static_cast<Eigen::Index>(r)).data(), width),
                                std::span<const double>(out.row(static_cast<Eigen::Index>(r)).data(), width), layout);
    TraceErrors te;
    te.trace = se.trace_mse;
    for (std::size_t e = 0; e < batch.lengths[r]; ++e) {
      std::vector<double> slots(se.slot_mse.begin() + static_cast<std::ptrdiff_t>(e * spe),
                                se.slot_mse.begin() + static_cast<std::ptrdiff_t>((e + 1) * spe));
      te.events.push_back(std::accumulate(slots.begin(), slots.end(), 0.0) / static_cast<double>(spe));
      te.slots.push_back(std::move(slots));
    }
    errors.push_back(std::move(te));
  }
  return errors;
}

ResolutionMeans mean_errors(const std::vector<TraceErrors>& errors) {
  std::vector<double> traces, events, attrs;
  for (const auto& te : errors) {
    traces.push_back(te.trace);
    events.insert(events.end(), te.events.begin(), te.events.end());
    for (const auto& s : te.slots) attrs.insert(attrs.end(), s.begin(), s.end());
  }
  ResolutionMeans m;
  m[Resolution::Trace] = mean_error(traces);
  m[Resolution::Event] = mean_error(events);
  m[Resolution::Attribute] = mean_error(attrs);
  return m;
}

namespace {

Matrix gather_rows(const Matrix& data, std::span<const std::size_t> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), data.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = data.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

}  // namespace

TrainedNetwork train(const EncodedBatch& batch, const EncodingLayout& layout, const TrainConfig& cfg) {
  cfg.validate();
  const std::size_t n = batch.rows();
  if (n < 2) throw DataError("train: need at least 2 traces");
  if (static_cast<std::size_t>(batch.data.cols()) != layout.total_width()) {
    throw DataError("train: batch width does not match layout");
  }
  Rng rng(derive_seed(cfg.seed, "train"));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_val = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(static_cast<double>(n) * cfg.validation_fraction)), 1, n - 1);
  std::vector<std::size_t> val_rows(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train_rows(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(val_rows.begin(), val_rows.end());
  std::sort(train_rows.begin(), train_rows.end());
  const Matrix val_data = gather_rows(batch.data, val_rows);

  const std::size_t d = layout.total_width();
  std::vector<std::size_t> sizes = {d};
  for (auto h : hidden_sizes(d, cfg)) sizes.push_back(h);
  sizes.push_back(d);
  Network net = Network::glorot(sizes, rng);
  AdamState adam = AdamState::for_network(net);
  AdamParams params{cfg.lr, cfg.beta1, cfg.beta2, cfg.epsilon};
  const Regularization reg{cfg.noise_sigma, cfg.dropout_rate};

  TrainedNetwork result{net, layout, cfg, {}, {}, 0};
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t stale_epochs = 0;
  std::size_t plateau_epochs = 0;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(train_rows.begin(), train_rows.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < train_rows.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(train_rows.size(), start + cfg.batch_size);
      const Matrix target =
          gather_rows(batch.data, std::span<const std::size_t>(train_rows.data() + start, end - start));
      Matrix input = target;
      if (cfg.noise_mu != 0.0) input.array() += cfg.noise_mu;
      const auto cache = forward(net, input, Mode::Train, reg, rng);
      const double loss = mse_loss(cache.output, target);
      if (!std::isfinite(loss)) {
        throw TrainingError("non-finite training loss at epoch " + std::to_string(epoch) +
                            " (lr=" + format_double(params.lr) + ")");
      }
      loss_sum += loss * static_cast<double>(end - start);
      adam_step(net, backward(net, cache, target), adam, params);
    }
    const double train_loss = loss_sum / static_cast<double>(train_rows.size());
    const double val_loss = mse_loss(infer(net, val_data), val_data);
    if (!std::isfinite(val_loss)) throw TrainingError("non-finite validation loss at epoch " + std::to_string(epoch));
    result.history.push_back(EpochRecord{epoch, train_loss, val_loss, params.lr});
    log::debug("epoch " + std::to_string(epoch) + " train " + format_double(train_loss) + " val " +
               format_double(val_loss));

    if (val_loss < best_val) {
      best_val = val_loss;
      result.net = net;
      result.best_epoch = epoch;
      stale_epochs = 0;
      plateau_epochs = 0;
      continue;
    }
    ++stale_epochs;
    ++plateau_epochs;
    if (stale_epochs >= cfg.early_stop_patience) break;
    if (plateau_epochs >= cfg.lr_plateau_patience) {
      params.lr *= cfg.lr_factor;
      plateau_epochs = 0;
    }
  }

  result.train_errors = mean_errors(reconstruction_errors(result.net, batch, layout));
  return result;
}

// ---------------------------------------------------------------------------
// Artifact: magic, u64 LE header length, JSON header, LE float64 weight blocks.

namespace {

constexpr char kMagic[8] = {'B', 'P', 'A', 'D', 'N', 'E', 'T', '\n'};

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(std::string_view in, std::size_t pos) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  return v;
}

void put_doubles(std::string& out, const double* data, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) put_u64(out, std::bit_cast<std::uint64_t>(data[i]));
}

nlohmann::ordered_json config_json(const TrainConfig& c) {
  nlohmann::ordered_json j;
  j["batch_size"] = c.batch_size;
  j["max_epochs"] = c.max_epochs;
  j["early_stop_patience"] = c.early_stop_patience;
  j["lr"] = c.lr;
  j["lr_plateau_patience"] = c.lr_plateau_patience;
  j["lr_factor"] = c.lr_factor;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["epsilon"] = c.epsilon;
  j["dropout_rate"] = c.dropout_rate;
  j["noise_mu"] = c.noise_mu;
  j["noise_sigma"] = c.noise_sigma;
  j["hidden_size_ratio"] = c.hidden_size_ratio;
  j["n_hidden_layers"] = c.n_hidden_layers;
  j["validation_fraction"] = c.validation_fraction;
  j["seed"] = c.seed;
  return j;
}

TrainConfig config_from_json(const nlohmann::ordered_json& j) {
  TrainConfig c;
  c.batch_size = j.at("batch_size");
  c.max_epochs = j.at("max_epochs");
  c.early_stop_patience = j.at("early_stop_patience");
  c.lr = j.at("lr");
  c.lr_plateau_patience = j.at("lr_plateau_patience");
  c.lr_factor = j.at("lr_factor");
  c.beta1 = j.at("beta1");
  c.beta2 = j.at("beta2");
  c.epsilon = j.at("epsilon");
  c.dropout_rate = j.at("dropout_rate");
  c.noise_mu = j.at("noise_mu");
  c.noise_sigma = j.at("noise_sigma");
  c.hidden_size_ratio = j.at("hidden_size_ratio");
  c.n_hidden_layers = j.at("n_hidden_layers");
  c.validation_fraction = j.at("validation_fraction");
  c.seed = j.at("seed");
  return c;
}

}  // namespace

std::string serialize_artifact(const TrainedNetwork& model, double alpha) {
  nlohmann::ordered_json h;
  h["format"] = "bpad-dae";
  h["version"] = kArtifactVersion;
  h["layer_sizes"] = model.net.sizes();
  auto acts = nlohmann::ordered_json::array();
  for (const auto& l : model.net.layers) acts.push_back(l.activation == Activation::Relu ? "relu" : "linear");
  h["activations"] = std::move(acts);
  h["layout"] = nlohmann::ordered_json::parse(serialize_layout(model.layout));
  h["train_config"] = config_json(model.cfg);
  h["alpha"] = alpha;
  h["train_errors"] = {{"trace", model.train_errors[Resolution::Trace]},
                       {"event", model.train_errors[Resolution::Event]},
                       {"attribute", model.train_errors[Resolution::Attribute]}};
  h["best_epoch"] = model.best_epoch;
  auto hist = nlohmann::ordered_json::array();
  for (const auto& r : model.history) hist.push_back({r.epoch, r.train_loss, r.val_loss, r.lr});
  h["history"] = std::move(hist);
  const std::string header = h.dump();

  std::string out(kMagic, sizeof kMagic);
  put_u64(out, header.size());
  out += header;
  for (const auto& l : model.net.layers) {
    put_doubles(out, l.weights.data(), static_cast<std::size_t>(l.weights.size()));
    put_doubles(out, l.bias.data(), static_cast<std::size_t>(l.bias.size()));
  }
  return out;
}

TrainedNetwork parse_artifact(std::string_view bytes, double* alpha) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw DataError("not a bpad network artifact");
  }
  const std::uint64_t header_len = get_u64(bytes, 8);
  if (header_len > bytes.size() - 16) throw DataError("artifact header truncated");
  try {
    auto h = nlohmann::ordered_json::parse(bytes.substr(16, header_len));
    if (h.at("format") != "bpad-dae") throw DataError("artifact format is not bpad-dae");
    const int version = h.at("version");
    if (version != kArtifactVersion) throw DataError("unsupported artifact version " + std::to_string(version));
    const auto sizes = h.at("layer_sizes").get<std::vector<std::size_t>>();
    Network net = Network::zeros(sizes);
    const auto acts = h.at("activations").get<std::vector<std::string>>();
    if (acts.size() != net.layers.size()) throw DataError("artifact activation count mismatch");
    std::size_t pos = 16 + header_len;
    auto read_block = [&](double* dst, std::size_t n) {
      if (bytes.size() < pos + 8 * n) throw DataError("artifact weights truncated");
      for (std::size_t i = 0; i < n; ++i, pos += 8) dst[i] = std::bit_cast<double>(get_u64(bytes, pos));
    };
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      auto& layer = net.layers[l];
      layer.activation = acts[l] == "relu" ? Activation::Relu : Activation::Linear;
      read_block(layer.weights.data(), static_cast<std::size_t>(layer.weights.size()));
      read_block(layer.bias.data(), static_cast<std::size_t>(layer.bias.size()));
    }
    if (pos != bytes.size()) throw DataError("artifact has trailing bytes");
    TrainedNetwork model{std::move(net), parse_layout(h.at("layout").dump()), config_from_json(h.at("train_config")),
                         {}, {}, h.at("best_epoch")};
    model.train_errors[Resolution::Trace] = h.at("train_errors").at("trace");
    model.train_errors[Resolution::Event] = h.at("train_errors").at("event");
    model.train_errors[Resolution::Attribute] = h.at("train_errors").at("attribute");
    for (const auto& r : h.at("history")) {
      model.history.push_back(EpochRecord{r.at(0), r.at(1), r.at(2), r.at(3)});
    }
    if (alpha) *alpha = h.at("alpha");
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("artifact header: ") + e.what());
  }
}

void save_artifact(const TrainedNetwork& model, double alpha, const std::filesystem::path& path) {
  atomic_write(path, serialize_artifact(model, alpha));
}

TrainedNetwork load_artifact(const std::filesystem::path& path, double* alpha) {
  return parse_artifact(read_file(path), alpha);
}

std::string history_csv(const std::vector<EpochRecord>& history) {
  std::string out = "epoch,train_loss,val_loss,lr\n";
  for (const auto& r : history) {
    out += std::to_string(r.epoch) + "," + format_double(r.train_loss) + "," + format_double(r.val_loss) + "," +
           format_double(r.lr) + "\n";
  }
  return out;
}

}  // namespace bpad
