#pragma once

#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "slug/common.hpp"
#include "slug/layers.hpp"
#include "slug/rng.hpp"
#include "slug/tensor.hpp"

namespace slug::nn {

// ---------------------------------------------------------------------------
// NetworkSpec: the serializable architecture description. The canonical
// text form round-trips exactly (integers as decimal, norm statistics as
// hex floats).

struct LayerSpec {
  std::string kind;               // dense|conv|elu|norm|down|up|flatten|reshape|res
  std::vector<long long> iargs;   // integer arguments
  std::vector<double> stats;      // frozen norm statistics, when present

  bool operator==(const LayerSpec&) const = default;
};

struct NetworkSpec {
  Shape input;
  std::vector<LayerSpec> layers;

  bool operator==(const NetworkSpec&) const = default;
};

inline std::string format_hex_double(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%a", v);
  return std::string(buf);
}

inline std::string to_text(const NetworkSpec& spec) {
  std::ostringstream os;
  os << "slugnet 1\n";
  os << "input " << spec.input.w << " " << spec.input.h << " " << spec.input.c
     << "\n";
  for (const auto& l : spec.layers) {
    os << l.kind;
    for (long long a : l.iargs) os << " " << a;
    if (!l.stats.empty()) {
      os << " stats";
      for (double s : l.stats) os << " " << format_hex_double(s);
    }
    os << "\n";
  }
  os << "end\n";
  return os.str();
}

inline NetworkSpec parse_network_spec(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  NetworkSpec spec;
  bool have_header = false, have_input = false, have_end = false;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    if (!have_header) {
      int version = 0;
      if (tok != "slugnet" || !(ls >> version) || version != 1) {
        throw ConfigError("network spec: bad header at line " +
                          std::to_string(lineno));
      }
      have_header = true;
      continue;
    }
    if (tok == "end") {
      have_end = true;
      break;
    }
    if (!have_input) {
      if (tok != "input") {
        throw ConfigError("network spec: expected 'input' at line " +
                          std::to_string(lineno));
      }
      if (!(ls >> spec.input.w >> spec.input.h >> spec.input.c)) {
        throw ConfigError("network spec: malformed input line");
      }
      have_input = true;
      continue;
    }
    LayerSpec l;
    l.kind = tok;
    std::string arg;
    while (ls >> arg) {
      if (arg == "stats") {
        std::string sv;
        while (ls >> sv) l.stats.push_back(std::strtod(sv.c_str(), nullptr));
        break;
      }
      try {
        l.iargs.push_back(std::stoll(arg));
      } catch (const std::exception&) {
        throw ConfigError("network spec: bad argument '" + arg + "' at line " +
                          std::to_string(lineno));
      }
    }
    spec.layers.push_back(std::move(l));
  }
  if (!have_header || !have_input || !have_end) {
    throw ConfigError("network spec: truncated (missing header/input/end)");
  }
  return spec;
}

// ---------------------------------------------------------------------------
// Parameter layout and flat parameter vectors.

struct Layout {
  std::vector<LayoutRecord> records;
  std::size_t total = 0;

  bool operator==(const Layout& o) const {
    if (total != o.total || records.size() != o.records.size()) return false;
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (records[i].id != o.records[i].id ||
          records[i].offset != o.records[i].offset ||
          records[i].size != o.records[i].size ||
          records[i].dims != o.records[i].dims)
        return false;
    }
    return true;
  }
};

struct ParamVector {
  std::vector<double> values;
  std::shared_ptr<const Layout> layout;

  std::size_t size() const { return values.size(); }
  double* data() { return values.data(); }
  const double* data() const { return values.data(); }
};

// One named block of the structured (unflattened) view.
struct ParamBlock {
  std::string id;
  std::vector<int> dims;
  std::vector<double> values;
};

// ---------------------------------------------------------------------------

class Network {
 public:
  explicit Network(NetworkSpec spec) : spec_(std::move(spec)) {
    if (spec_.input.w < 1 || spec_.input.h < 1 || spec_.input.c < 1) {
      throw ConfigError("network: bad input shape " + spec_.input.str());
    }
    Shape s = spec_.input;
    std::size_t off = 0;
    auto layout = std::make_shared<Layout>();
    for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
      auto layer = make_layer(spec_.layers[i]);
      s = layer->infer(s);
      const std::string prefix =
          std::to_string(i) + ":" + std::string(layer->kind());
      std::vector<LayoutRecord> recs;
      layer->append_layout(recs, prefix);
      for (auto& r : recs) {
        r.offset += off;
        layout->records.push_back(std::move(r));
      }
      offsets_.push_back(off);
      off += layer->param_count();
      layers_.push_back(std::move(layer));
    }
    out_shape_ = s;
    layout->total = off;
    layout_ = std::move(layout);
  }

  const NetworkSpec& spec() const { return spec_; }
  Shape input_shape() const { return spec_.input; }
  Shape output_shape() const { return out_shape_; }
  std::size_t param_count() const { return layout_->total; }
  std::shared_ptr<const Layout> layout() const { return layout_; }
  std::size_t layer_count() const { return layers_.size(); }
  const Layer& layer(std::size_t i) const { return *layers_[i]; }
  std::size_t layer_param_offset(std::size_t i) const { return offsets_[i]; }

  void check_params(const ParamVector& p) const {
    if (p.values.size() != param_count()) {
      throw ConfigError("parameter vector length " +
                        std::to_string(p.values.size()) +
                        " does not match network (" +
                        std::to_string(param_count()) + ")");
    }
  }

  void check_input(const Tensor& x) const {
    if (!(x.shape == spec_.input)) {
      throw ConfigError("input shape " + x.shape.str() +
                        " does not match network input " + spec_.input.str());
    }
  }

 private:
  static std::unique_ptr<Layer> make_layer(const LayerSpec& l) {
    auto want = [&](std::size_t n) {
      if (l.iargs.size() != n) {
        throw ConfigError("layer '" + l.kind + "': expected " +
                          std::to_string(n) + " arguments");
      }
    };
    if (l.kind == "dense") {
      want(1);
      return std::make_unique<DenseLayer>(static_cast<int>(l.iargs[0]));
    }
    if (l.kind == "conv") {
      want(2);
      return std::make_unique<ConvLayer>(static_cast<int>(l.iargs[0]),
                                         static_cast<int>(l.iargs[1]));
    }
    if (l.kind == "elu") {
      want(0);
      return std::make_unique<EluLayer>();
    }
    if (l.kind == "norm") {
      want(0);
      return std::make_unique<NormLayer>(l.stats);
    }
    if (l.kind == "down") {
      want(0);
      return std::make_unique<DownLayer>();
    }
    if (l.kind == "up") {
      want(0);
      return std::make_unique<UpLayer>();
    }
    if (l.kind == "flatten") {
      want(0);
      return std::make_unique<FlattenLayer>();
    }
    if (l.kind == "reshape") {
      want(3);
      return std::make_unique<ReshapeLayer>(Shape{static_cast<int>(l.iargs[0]),
                                                  static_cast<int>(l.iargs[1]),
                                                  static_cast<int>(l.iargs[2])});
    }
    if (l.kind == "res") {
      want(0);
      if (!l.stats.empty()) {
        const std::size_t half = l.stats.size() / 2;
        return std::make_unique<ResidualLayer>(
            std::vector<double>(l.stats.begin(), l.stats.begin() + half),
            std::vector<double>(l.stats.begin() + half, l.stats.end()));
      }
      return std::make_unique<ResidualLayer>();
    }
    throw ConfigError("unknown layer kind '" + l.kind + "'");
  }

  NetworkSpec spec_;
  std::vector<std::unique_ptr<Layer>> layers_;
  std::vector<std::size_t> offsets_;
  Shape out_shape_;
  std::shared_ptr<const Layout> layout_;
};

// ---------------------------------------------------------------------------
// Forward evaluation with stashed activations. The trace owns every
// layer input plus the final output, so repeated vjp/jvp calls against
// the same input skip the forward pass.

struct ForwardTrace {
  // acts[i] is the input of layer i; acts[n] is the network output.
  std::vector<std::vector<double>> acts;
};

namespace detail {

inline void check_finite_layer(const Network& net, std::size_t layer_idx,
                               const double* v, std::size_t n) {
  if (!all_finite(v, n)) {
    throw NumericError("non-finite values in output of layer " +
                       std::to_string(layer_idx) + " (" +
                       std::string(net.layer(layer_idx).kind()) + ")");
  }
}

}  // namespace detail

inline ForwardTrace forward_trace(const Network& net, const ParamVector& params,
                                  const Tensor& x) {
  net.check_params(params);
  net.check_input(x);
  ForwardTrace t;
  t.acts.resize(net.layer_count() + 1);
  t.acts[0] = x.v;
  for (std::size_t i = 0; i < net.layer_count(); ++i) {
    const Layer& l = net.layer(i);
    t.acts[i + 1].resize(l.out_shape.size());
    l.forward(t.acts[i].data(), params.data() + net.layer_param_offset(i),
              t.acts[i + 1].data());
    detail::check_finite_layer(net, i, t.acts[i + 1].data(),
                               t.acts[i + 1].size());
  }
  return t;
}

inline Tensor forward(const Network& net, const ParamVector& params,
                      const Tensor& x) {
  ForwardTrace t = forward_trace(net, params, x);
  return Tensor(net.output_shape(), std::move(t.acts.back()));
}

struct VjpResult {
  Tensor input_cot;       // cotangent pulled back to the network input
  ParamVector param_cot;  // cotangent with respect to the parameters
};

inline VjpResult vjp_with_trace(const Network& net, const ParamVector& params,
                                const ForwardTrace& trace,
                                const std::vector<double>& cot_out) {
  if (cot_out.size() != net.output_shape().size()) {
    throw ConfigError("cotangent length " + std::to_string(cot_out.size()) +
                      " does not match network output " +
                      net.output_shape().str());
  }
  VjpResult r;
  r.param_cot.values.assign(net.param_count(), 0.0);
  r.param_cot.layout = net.layout();
  std::vector<double> g = cot_out, gi;
  for (std::size_t i = net.layer_count(); i-- > 0;) {
    const Layer& l = net.layer(i);
    gi.resize(l.in_shape.size());
    l.backward(trace.acts[i].data(), params.data() + net.layer_param_offset(i),
               g.data(), gi.data(),
               r.param_cot.values.data() + net.layer_param_offset(i));
    detail::check_finite_layer(net, i, gi.data(), gi.size());
    std::swap(g, gi);
  }
  r.input_cot = Tensor(net.input_shape(), std::move(g));
  return r;
}

// J^T u with respect to the parameters.
inline ParamVector vjp(const Network& net, const ParamVector& params,
                       const Tensor& x, const Tensor& cot) {
  if (!(cot.shape == net.output_shape())) {
    throw ConfigError("cotangent shape " + cot.shape.str() +
                      " does not match network output " +
                      net.output_shape().str());
  }
  ForwardTrace t = forward_trace(net, params, x);
  return vjp_with_trace(net, params, t, cot.v).param_cot;
}

// J v given an input tangent dx (may be empty => zero) and a parameter
// tangent dparams (may be empty => zero).
inline Tensor jvp_with_trace(const Network& net, const ParamVector& params,
                             const ForwardTrace& trace,
                             const std::vector<double>& dx,
                             const std::vector<double>& dparams) {
  static const std::vector<double> kEmpty;
  std::vector<double> zero_params;
  const double* dp = nullptr;
  if (dparams.empty()) {
    zero_params.assign(net.param_count(), 0.0);
    dp = zero_params.data();
  } else {
    if (dparams.size() != net.param_count()) {
      throw ConfigError("parameter tangent length mismatch");
    }
    dp = dparams.data();
  }
  std::vector<double> t;
  if (dx.empty()) {
    t.assign(net.input_shape().size(), 0.0);
  } else {
    if (dx.size() != net.input_shape().size()) {
      throw ConfigError("input tangent length mismatch");
    }
    t = dx;
  }
  std::vector<double> t_next;
  for (std::size_t i = 0; i < net.layer_count(); ++i) {
    const Layer& l = net.layer(i);
    t_next.resize(l.out_shape.size());
    l.tangent(trace.acts[i].data(), t.data(),
              params.data() + net.layer_param_offset(i),
              dp + net.layer_param_offset(i), t_next.data());
    detail::check_finite_layer(net, i, t_next.data(), t_next.size());
    std::swap(t, t_next);
  }
  (void)kEmpty;
  return Tensor(net.output_shape(), std::move(t));
}

inline Tensor jvp(const Network& net, const ParamVector& params,
                  const Tensor& x, const ParamVector& tangent) {
  net.check_params(params);
  if (tangent.values.size() != net.param_count()) {
    throw ConfigError("tangent length " + std::to_string(tangent.values.size()) +
                      " does not match network parameters (" +
                      std::to_string(net.param_count()) + ")");
  }
  ForwardTrace t = forward_trace(net, params, x);
  return jvp_with_trace(net, params, t, {}, tangent.values);
}

// Multi-tap forward: returns the outputs of the requested layers.
// Tap index 0 is the raw input, tap index i >= 1 is the output of layer
// i-1. Used by the perceptual loss.
inline std::vector<Tensor> forward_taps(const Network& net,
                                        const ParamVector& params,
                                        const Tensor& x,
                                        const std::vector<int>& taps) {
  ForwardTrace t = forward_trace(net, params, x);
  std::vector<Tensor> out;
  out.reserve(taps.size());
  for (int tap : taps) {
    if (tap < 0 || static_cast<std::size_t>(tap) >= t.acts.size()) {
      throw ConfigError("tap index " + std::to_string(tap) + " out of range");
    }
    Shape s = tap == 0 ? net.input_shape() : net.layer(tap - 1).out_shape;
    out.emplace_back(s, t.acts[tap]);
  }
  return out;
}

// Pulls per-tap cotangents back to the network input. Parameter
// cotangents are accumulated too but callers of frozen feature networks
// only consume the input part.
inline Tensor vjp_taps_input(const Network& net, const ParamVector& params,
                             const ForwardTrace& trace,
                             const std::vector<std::pair<int, std::vector<double>>>& tap_cots) {
  std::vector<double> g(net.output_shape().size(), 0.0);
  // walk backwards, injecting tap cotangents as we pass them
  std::vector<double> scratch_params(net.param_count());
  std::vector<double> gi;
  // start from the deepest activation
  const std::size_t n_layers = net.layer_count();
  g.assign(trace.acts[n_layers].size(), 0.0);
  for (const auto& [tap, cot] : tap_cots) {
    if (static_cast<std::size_t>(tap) == n_layers) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += cot[i];
    }
  }
  for (std::size_t i = n_layers; i-- > 0;) {
    const Layer& l = net.layer(i);
    gi.resize(l.in_shape.size());
    l.backward(trace.acts[i].data(), params.data() + net.layer_param_offset(i),
               g.data(), gi.data(),
               scratch_params.data() + net.layer_param_offset(i));
    for (const auto& [tap, cot] : tap_cots) {
      if (static_cast<std::size_t>(tap) == i) {
        for (std::size_t j = 0; j < gi.size(); ++j) gi[j] += cot[j];
      }
    }
    std::swap(g, gi);
  }
  return Tensor(net.input_shape(), std::move(g));
}

// ---------------------------------------------------------------------------
// flatten / unflatten and initialization.

inline std::vector<ParamBlock> unflatten(const Network& net,
                                         const ParamVector& p) {
  net.check_params(p);
  std::vector<ParamBlock> blocks;
  for (const auto& rec : net.layout()->records) {
    ParamBlock b;
    b.id = rec.id;
    b.dims = rec.dims;
    b.values.assign(p.values.begin() + rec.offset,
                    p.values.begin() + rec.offset + rec.size);
    blocks.push_back(std::move(b));
  }
  return blocks;
}

inline ParamVector flatten(const Network& net,
                           const std::vector<ParamBlock>& blocks) {
  const auto& layout = *net.layout();
  if (blocks.size() != layout.records.size()) {
    throw ConfigError("flatten: expected " +
                      std::to_string(layout.records.size()) + " blocks, got " +
                      std::to_string(blocks.size()));
  }
  ParamVector p;
  p.values.assign(layout.total, 0.0);
  p.layout = net.layout();
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto& rec = layout.records[i];
    if (blocks[i].id != rec.id || blocks[i].values.size() != rec.size) {
      throw ConfigError("flatten: block '" + blocks[i].id +
                        "' does not match layout record '" + rec.id + "'");
    }
    std::copy(blocks[i].values.begin(), blocks[i].values.end(),
              p.values.begin() + rec.offset);
  }
  return p;
}

// Fan-in scaled Gaussian init for weights, zeros for biases, and
// (gamma, beta) = (1, 0) for norm layers.
inline ParamVector init_params(const Network& net, std::uint64_t seed) {
  ParamVector p;
  p.values.assign(net.param_count(), 0.0);
  p.layout = net.layout();
  std::vector<int> fan;
  fan.reserve(net.param_count());
  for (std::size_t i = 0; i < net.layer_count(); ++i) {
    net.layer(i).append_fan_in(fan);
  }
  for (std::size_t i = 0; i < p.values.size(); ++i) {
    if (fan[i] > 0) {
      p.values[i] = rng::gaussian(seed, rng::Stream::param_init, i) /
                    std::sqrt(static_cast<double>(fan[i]));
    }
  }
  // norm gammas start at one
  for (const auto& rec : net.layout()->records) {
    if (rec.id.size() >= 6 &&
        rec.id.compare(rec.id.size() - 6, 6, "/gamma") == 0) {
      for (std::size_t j = 0; j < rec.size; ++j) p.values[rec.offset + j] = 1.0;
    }
  }
  return p;
}

// ---------------------------------------------------------------------------
// Parameter vector file format: "SLUGPARM", version u32, p u64, then p
// little-endian doubles.

inline void save_params(const std::string& path, const ParamVector& p) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot open '" + path + "' for writing");
  os.write("SLUGPARM", 8);
  const std::uint32_t version = 1;
  os.write(reinterpret_cast<const char*>(&version), sizeof(version));
  const std::uint64_t n = p.values.size();
  os.write(reinterpret_cast<const char*>(&n), sizeof(n));
  os.write(reinterpret_cast<const char*>(p.values.data()),
           static_cast<std::streamsize>(sizeof(double) * p.values.size()));
  if (!os) throw ConfigError("short write to '" + path + "'");
}

inline ParamVector load_params(const std::string& path,
                               std::shared_ptr<const Layout> layout = nullptr) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open '" + path + "'");
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, "SLUGPARM", 8) != 0) {
    throw ConfigError("'" + path + "' is not a parameter file (bad magic)");
  }
  std::uint32_t version = 0;
  is.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (!is || version != 1) {
    throw ConfigError("'" + path + "': unsupported parameter file version");
  }
  std::uint64_t n = 0;
  is.read(reinterpret_cast<char*>(&n), sizeof(n));
  ParamVector p;
  p.values.resize(n);
  is.read(reinterpret_cast<char*>(p.values.data()),
          static_cast<std::streamsize>(sizeof(double) * n));
  if (!is) throw ConfigError("'" + path + "': truncated parameter data");
  if (layout) {
    if (layout->total != n) {
      throw ConfigError("'" + path + "': parameter count " + std::to_string(n) +
                        " does not match expected layout (" +
                        std::to_string(layout->total) + ")");
    }
    p.layout = std::move(layout);
  }
  return p;
}

}  // namespace slug::nn
