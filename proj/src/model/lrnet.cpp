#include "lrnet/model/lrnet.hpp"

#include <json.hpp>

#include <sstream>

namespace lrnet::model {

void BlockSpec::validate() const {
  if (f3 == 0 || f5 == 0 || f7 == 0 || f_out == 0) throw ConfigError("block filter counts must be positive");
  if (!(f3 > f5 && f5 >= f7)) {
    throw ConfigError("block filters must satisfy f3 > f5 >= f7, got " + std::to_string(f3) + "," +
                      std::to_string(f5) + "," + std::to_string(f7));
  }
}

void ModelSpec::validate() const {
  if (blocks.size() != 3) throw ConfigError("model needs exactly 3 blocks, got " + std::to_string(blocks.size()));
  for (const auto& b : blocks) b.validate();
  for (auto w : dense_widths) {
    if (w == 0) throw ConfigError("dense widths must be positive");
  }
  if (num_classes < 2) throw ConfigError("num_classes must be at least 2");
  if (input_channels == 0) throw ConfigError("input_channels must be positive");
  std::size_t s = input_size;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (s < kMinBlockExtent) {
      throw ConfigError("input size " + std::to_string(input_size) + " leaves block " + std::to_string(i + 1) +
                        " with " + std::to_string(s) + " pixels; need >= " + std::to_string(kMinBlockExtent));
    }
    s = pooled_extent(s);
  }
}

std::vector<std::size_t> ModelSpec::spatial_trace() const {
  std::vector<std::size_t> trace{input_size};
  for (std::size_t i = 0; i < blocks.size(); ++i) trace.push_back(pooled_extent(trace.back()));
  return trace;
}

std::size_t ModelSpec::flatten_width() const {
  const std::size_t s = spatial_trace().back();
  return s * s * blocks.back().f_out;
}

namespace {

template <typename T>
ConvRef add_conv(std::vector<Parameter<T>>& params, const std::string& name, std::size_t k, std::size_t cin,
                 std::size_t cout, std::mt19937_64& rng) {
  auto created = nn::init_parameters<T>(nn::LayerSpec::conv(k, cin, cout), name, rng);
  ConvRef ref{params.size(), params.size() + 1};
  for (auto& p : created) params.push_back(std::move(p));
  return ref;
}

template <typename T>
ConvRef add_dense(std::vector<Parameter<T>>& params, const std::string& name, std::size_t in, std::size_t out,
                  std::mt19937_64& rng) {
  auto created = nn::init_parameters<T>(nn::LayerSpec::dense(in, out), name, rng);
  ConvRef ref{params.size(), params.size() + 1};
  for (auto& p : created) params.push_back(std::move(p));
  return ref;
}

}  // namespace

template <typename T>
MKBlock<T>::MKBlock(std::string name, std::size_t in_channels, const BlockSpec& spec,
                    std::vector<Parameter<T>>& params, std::mt19937_64& rng)
    : name_(std::move(name)), in_channels_(in_channels), spec_(spec) {
  spec_.validate();
  if (in_channels_ == 0) throw ConfigError("block input channels must be positive");
  const std::string p = name_ + ".";
  a_ = add_conv(params, p + "conv3x3_a", 3, in_channels_, spec_.f3, rng);
  b_ = add_conv(params, p + "conv5x5_b", 5, in_channels_, spec_.f5, rng);
  c_ = add_conv(params, p + "conv7x7_c", 7, in_channels_, spec_.f7, rng);
  right_ = add_conv(params, p + "conv5x5_r", 5, spec_.f5 + spec_.f7, spec_.f5, rng);
  left1_ = add_conv(params, p + "conv3x3_l1", 3, spec_.f3 + spec_.f5, spec_.f3, rng);
  left2_ = add_conv(params, p + "conv3x3_l2", 3, spec_.f3, spec_.f3, rng);
  const std::size_t fused_in = (spec_.f3 + spec_.f5 + spec_.f7) + spec_.f5 + spec_.f3;
  fuse_ = add_conv(params, p + "fuse1x1", 1, fused_in, spec_.f_out, rng);
  if (in_channels_ != spec_.f_out) projection_ = add_conv(params, p + "proj1x1", 1, in_channels_, spec_.f_out, rng);
}

template <typename T>
BasicNode<T> MKBlock<T>::forward(BasicNode<T> x, std::vector<Parameter<T>>& params) const {
  const Shape4 s = Shape4::of(x.shape());
  if (s.h < kMinBlockExtent || s.w < kMinBlockExtent) {
    throw ShapeError(name_ + ": input " + shape_to_string(x.shape()) + " is smaller than 7x7");
  }
  Graph<T>& g = *x.graph;
  const std::string p = name_ + ".";
  auto conv = [&](const ConvRef& ref, BasicNode<T> in, const char* label) {
    return ag::conv2d(in, g.parameter(params.at(ref.kernel)), g.parameter(params.at(ref.bias)), p + label);
  };

  auto A = ag::relu(conv(a_, x, "conv3x3_a"), p + "relu_a");
  auto B = ag::relu(conv(b_, x, "conv5x5_b"), p + "relu_b");
  auto C = ag::relu(conv(c_, x, "conv7x7_c"), p + "relu_c");
  auto junction = ag::concat<T>({A, B, C}, p + "concat_abc");
  auto R = ag::relu(conv(right_, ag::concat<T>({B, C}, p + "concat_bc"), "conv5x5_r"), p + "relu_r");
  auto L1 = ag::relu(conv(left1_, ag::concat<T>({A, B}, p + "concat_ab"), "conv3x3_l1"), p + "relu_l1");
  auto L2 = ag::relu(conv(left2_, L1, "conv3x3_l2"), p + "relu_l2");
  auto fused = conv(fuse_, ag::concat<T>({junction, R, L2}, p + "concat_fuse"), "fuse1x1");

  std::optional<nn::Projection<T>> proj;
  if (projection_) {
    proj = nn::Projection<T>{g.parameter(params.at(projection_->kernel)), g.parameter(params.at(projection_->bias))};
  }
  auto y = ag::relu(nn::residual_add(fused, x, proj, p + "residual"), p + "relu_out");
  return ag::maxpool2d(y, p + "pool");
}

template <typename T>
BlockBuild<T> build_block(BasicNode<T> x, const BlockSpec& spec, std::mt19937_64& rng, const std::string& name) {
  const Shape4 s = Shape4::of(x.shape());
  if (s.h < kMinBlockExtent || s.w < kMinBlockExtent) {
    throw ShapeError(name + ": input " + shape_to_string(x.shape()) + " is smaller than 7x7");
  }
  BlockBuild<T> out;
  MKBlock<T> block(name, s.c, spec, out.params, rng);
  out.output = block.forward(x, out.params);
  return out;
}

template <typename T>
Model<T>::Model(ModelSpec spec, std::mt19937_64& rng) : spec_(std::move(spec)) {
  init(rng);
}

template <typename T>
Model<T>::Model(ModelSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
  std::mt19937_64 rng(seed);
  init(rng);
}

template <typename T>
void Model<T>::init(std::mt19937_64& rng) {
  spec_.validate();
  std::size_t channels = spec_.input_channels;
  for (std::size_t i = 0; i < spec_.blocks.size(); ++i) {
    blocks_.emplace_back("block" + std::to_string(i + 1), channels, spec_.blocks[i], params_, rng);
    channels = spec_.blocks[i].f_out;
  }
  std::size_t width = spec_.flatten_width();
  for (std::size_t i = 0; i < spec_.dense_widths.size(); ++i) {
    dense_.push_back(add_dense(params_, "fc" + std::to_string(i + 1), width, spec_.dense_widths[i], rng));
    width = spec_.dense_widths[i];
  }
  dense_.push_back(add_dense(params_, "logits", width, spec_.num_classes, rng));
}

template <typename T>
BasicNode<T> Model<T>::forward(BasicNode<T> images) {
  const Shape4 s = Shape4::of(images.shape());
  if (s.h != spec_.input_size || s.w != spec_.input_size || s.c != spec_.input_channels) {
    throw ShapeError("model expects [N," + std::to_string(spec_.input_size) + "," + std::to_string(spec_.input_size) +
                     "," + std::to_string(spec_.input_channels) + "] input, got " + shape_to_string(images.shape()));
  }
  Graph<T>& g = *images.graph;
  BasicNode<T> h = images;
  for (const auto& block : blocks_) h = block.forward(h, params_);
  h = ag::flatten(h, "flatten");
  for (std::size_t i = 0; i < dense_.size(); ++i) {
    const bool last = i + 1 == dense_.size();
    const std::string name = last ? "logits" : "fc" + std::to_string(i + 1);
    h = ag::matmul(h, g.parameter(params_[dense_[i].kernel]), name + ".matmul");
    h = ag::bias_add(h, g.parameter(params_[dense_[i].bias]), name);
    if (!last) h = ag::relu(h, name + ".relu");
  }
  return h;
}

template <typename T>
Parameter<T>* Model<T>::find(const std::string& name) {
  for (auto& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

template <typename T>
std::size_t count_parameters(const Model<T>& model) {
  std::size_t total = 0;
  for (const auto& p : model.parameters()) {
    if (p.trainable) total += p.value.size();
  }
  return total;
}

template <typename T>
TopologyReport describe(Model<T>& model) {
  const ModelSpec& spec = model.spec();
  Graph<T> g;
  auto x = g.input(BasicTensor<T>(Shape{1, spec.input_size, spec.input_size, spec.input_channels}), "input");
  model.forward(x);

  TopologyReport report;
  report.blocks = model.blocks().size();
  for (std::size_t id = 0; id < g.size(); ++id) {
    const auto& r = g.record_at(id);
    if (r.op == Op::input || r.op == Op::parameter) continue;
    LayerReport layer;
    layer.node = id;
    layer.name = r.label.empty() ? std::string(op_name(r.op)) + "#" + std::to_string(id) : r.label;
    layer.kind = std::string(op_name(r.op));
    layer.output_shape = r.value.shape();
    for (auto in : r.inputs) {
      const auto& src = g.record_at(in);
      if (src.op == Op::parameter) {
        if (src.param->trainable) layer.parameters += src.value.size();
      } else {
        layer.inputs.push_back(src.label);
      }
    }
    report.total_parameters += layer.parameters;
    report.layers.push_back(std::move(layer));
  }
  return report;
}

std::string TopologyReport::to_text() const {
  std::ostringstream os;
  os << "layer                          kind                   output              params\n";
  for (const auto& l : layers) {
    std::string shape = shape_to_string(l.output_shape);
    os << l.name << std::string(l.name.size() < 31 ? 31 - l.name.size() : 1, ' ') << l.kind
       << std::string(l.kind.size() < 23 ? 23 - l.kind.size() : 1, ' ') << shape
       << std::string(shape.size() < 20 ? 20 - shape.size() : 1, ' ') << l.parameters << '\n';
  }
  os << "blocks: " << blocks << '\n';
  os << "total_parameters: " << total_parameters << '\n';
  return os.str();
}

std::string TopologyReport::to_json() const {
  nlohmann::ordered_json j;
  j["blocks"] = blocks;
  j["total_parameters"] = total_parameters;
  auto& arr = j["layers"] = nlohmann::ordered_json::array();
  for (const auto& l : layers) {
    nlohmann::ordered_json e;
    e["name"] = l.name;
    e["kind"] = l.kind;
    e["output_shape"] = l.output_shape;
    e["parameters"] = l.parameters;
    e["inputs"] = l.inputs;
    arr.push_back(std::move(e));
  }
  return j.dump(2);
}

template class MKBlock<float>;
template class MKBlock<double>;
template class Model<float>;
template class Model<double>;
template BlockBuild<float> build_block<float>(BasicNode<float>, const BlockSpec&, std::mt19937_64&, const std::string&);
template BlockBuild<double> build_block<double>(BasicNode<double>, const BlockSpec&, std::mt19937_64&,
                                                const std::string&);
template std::size_t count_parameters<float>(const Model<float>&);
template std::size_t count_parameters<double>(const Model<double>&);
template TopologyReport describe<float>(Model<float>&);
template TopologyReport describe<double>(Model<double>&);

}  // namespace lrnet::model
