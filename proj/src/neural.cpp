#include "vppnet/neural.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>

namespace vppnet {

namespace {

void add_matmul_ops(Eigen::Index rows, Eigen::Index inner, Eigen::Index cols) {
  opcount::add(static_cast<std::uint64_t>(rows) * cols * (2 * inner + 1));
}

/// y = x * w + b broadcast over rows.
Eigen::MatrixXd affine(const Eigen::MatrixXd& x, const Eigen::MatrixXd& w,
                       const Eigen::VectorXd& b) {
  add_matmul_ops(x.rows(), x.cols(), w.cols());
  return (x * w).rowwise() + b.transpose();
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& s) {
  Eigen::MatrixXd p(s.rows(), s.cols());
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const double m = s.row(i).maxCoeff();
    p.row(i) = (s.row(i).array() - m).exp();
    p.row(i) /= p.row(i).sum();
  }
  opcount::add(static_cast<std::uint64_t>(s.rows()) * s.cols() * 4);
  return p;
}

void require_finite(const Eigen::MatrixXd& m, const std::string& where) {
  if (!m.allFinite()) {
    throw NumericError("forward: non-finite activations in " + where);
  }
}

template <class Fn>
void for_each_tensor(ModelParams& p, Fn&& fn) {
  fn("w_embed1", p.w_embed1);
  fn("b_embed1", p.b_embed1);
  fn("w_embed2", p.w_embed2);
  fn("b_embed2", p.b_embed2);
  for (std::size_t k = 0; k < p.blocks.size(); ++k) {
    auto& b = p.blocks[k];
    const std::string tag = "block" + std::to_string(k) + ".";
    fn(tag + "w_query", b.w_query);
    fn(tag + "b_query", b.b_query);
    fn(tag + "w_key", b.w_key);
    fn(tag + "b_key", b.b_key);
    fn(tag + "w_value", b.w_value);
    fn(tag + "b_value", b.b_value);
    fn(tag + "w_out", b.w_out);
    fn(tag + "b_out", b.b_out);
    fn(tag + "w_ffn1", b.w_ffn1);
    fn(tag + "b_ffn1", b.b_ffn1);
    fn(tag + "w_ffn2", b.w_ffn2);
    fn(tag + "b_ffn2", b.b_ffn2);
  }
  fn("w_head", p.w_head);
  fn("b_head", p.b_head);
}

// Overloads so the visitor can treat vectors and matrices uniformly.
struct TensorRef {
  double* data;
  Eigen::Index rows;
  Eigen::Index cols;
};

template <class Fn>
void visit_flat(ModelParams& p, Fn&& fn) {
  for_each_tensor(p, [&](const std::string&, auto& tensor) {
    fn(TensorRef{tensor.data(), tensor.rows(), tensor.cols()});
  });
}

}  // namespace

void HyperParams::validate() const {
  if (d_in < 1 || d_h < 1 || n_blocks < 1 || d_out < 1) {
    throw std::invalid_argument("HyperParams: all dimensions must be >= 1");
  }
}

ModelParams ModelParams::zeros(const HyperParams& hyper) {
  hyper.validate();
  ModelParams p;
  p.hyper = hyper;
  p.w_embed1 = Eigen::MatrixXd::Zero(hyper.d_in, hyper.d_h);
  p.b_embed1 = Eigen::VectorXd::Zero(hyper.d_h);
  p.w_embed2 = Eigen::MatrixXd::Zero(hyper.d_h, hyper.d_h);
  p.b_embed2 = Eigen::VectorXd::Zero(hyper.d_h);
  p.blocks.resize(static_cast<std::size_t>(hyper.n_blocks));
  for (auto& b : p.blocks) {
    b.w_query = Eigen::MatrixXd::Zero(hyper.d_h, hyper.d_h);
    b.w_key = Eigen::MatrixXd::Zero(hyper.d_h, hyper.d_h);
    b.w_value = Eigen::MatrixXd::Zero(hyper.d_h, hyper.d_h);
    b.w_out = Eigen::MatrixXd::Zero(hyper.d_h, hyper.d_h);
    b.b_query = Eigen::VectorXd::Zero(hyper.d_h);
    b.b_key = Eigen::VectorXd::Zero(hyper.d_h);
    b.b_value = Eigen::VectorXd::Zero(hyper.d_h);
    b.b_out = Eigen::VectorXd::Zero(hyper.d_h);
    b.w_ffn1 = Eigen::MatrixXd::Zero(hyper.d_h, hyper.d_h);
    b.w_ffn2 = Eigen::MatrixXd::Zero(hyper.d_h, hyper.d_h);
    b.b_ffn1 = Eigen::VectorXd::Zero(hyper.d_h);
    b.b_ffn2 = Eigen::VectorXd::Zero(hyper.d_h);
  }
  p.w_head = Eigen::MatrixXd::Zero(hyper.d_h, hyper.d_out);
  p.b_head = Eigen::VectorXd::Zero(hyper.d_out);
  return p;
}

std::size_t ModelParams::n_params() const {
  std::size_t n = 0;
  visit_flat(const_cast<ModelParams&>(*this), [&](TensorRef t) {
    n += static_cast<std::size_t>(t.rows * t.cols);
  });
  return n;
}

Eigen::VectorXd ModelParams::to_flat() const {
  Eigen::VectorXd flat(static_cast<Eigen::Index>(n_params()));
  Eigen::Index at = 0;
  visit_flat(const_cast<ModelParams&>(*this), [&](TensorRef t) {
    const Eigen::Index n = t.rows * t.cols;
    std::memcpy(flat.data() + at, t.data, sizeof(double) * n);
    at += n;
  });
  return flat;
}

ModelParams ModelParams::from_flat(const HyperParams& hyper,
                                   const Eigen::VectorXd& flat) {
  ModelParams p = zeros(hyper);
  if (flat.size() != static_cast<Eigen::Index>(p.n_params())) {
    throw DimensionError("ModelParams::from_flat: size mismatch");
  }
  Eigen::Index at = 0;
  visit_flat(p, [&](TensorRef t) {
    const Eigen::Index n = t.rows * t.cols;
    std::memcpy(t.data, flat.data() + at, sizeof(double) * n);
    at += n;
  });
  return p;
}

ModelParams init_params(const HyperParams& hyper, std::uint64_t seed) {
  ModelParams p = ModelParams::zeros(hyper);
  Rng rng(seed);
  for_each_tensor(p, [&](const std::string& name, auto& tensor) {
    const std::size_t dot = name.find_last_of('.');
    const std::string leaf = dot == std::string::npos ? name : name.substr(dot + 1);
    if (leaf.starts_with("b_")) return;  // bias vectors stay zero
    const double limit =
        std::sqrt(6.0 / static_cast<double>(tensor.rows() + tensor.cols()));
    double* data = tensor.data();
    for (Eigen::Index i = 0; i < tensor.size(); ++i) {
      data[i] = rng.uniform(-limit, limit);
    }
  });
  return p;
}

Eigen::MatrixXd normalize_inputs(const ProblemInstance& instance) {
  Eigen::MatrixXd x(instance.n_agents(), 2);
  for (int i = 0; i < instance.n_agents(); ++i) {
    x(i, 0) = instance.agent(i).p_cap / kFeatureScaleKw;
    x(i, 1) = instance.agent(i).p_dem / kFeatureScaleKw;
  }
  opcount::add(static_cast<std::uint64_t>(instance.n_agents()) * 2);
  return x;
}

DecisionVector forward(const ModelParams& params,
                       const ProblemInstance& instance, ForwardCache* cache) {
  params.hyper.validate();
  if (params.hyper.d_out != 1) {
    throw DimensionError("forward: this problem has one output per agent");
  }
  const Eigen::MatrixXd x = normalize_inputs(instance);
  if (x.cols() != params.hyper.d_in) {
    throw DimensionError("forward: input feature width != d_in");
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(params.hyper.d_h));

  if (cache != nullptr) {
    *cache = ForwardCache{};
    cache->hyper = params.hyper;
    cache->n_agents = instance.n_agents();
    cache->inputs = x;
    cache->blocks.resize(params.blocks.size());
  }

  Eigen::MatrixXd e1 = affine(x, params.w_embed1, params.b_embed1);
  e1 = e1.array().tanh();
  Eigen::MatrixXd h = affine(e1, params.w_embed2, params.b_embed2);
  h = h.array().tanh();
  opcount::add(static_cast<std::uint64_t>(h.size() + e1.size()));
  require_finite(h, "embedding");
  if (cache != nullptr) {
    cache->embed_mid = e1;
    cache->embed_out = h;
  }

  for (std::size_t k = 0; k < params.blocks.size(); ++k) {
    const auto& blk = params.blocks[k];
    const Eigen::MatrixXd q = affine(h, blk.w_query, blk.b_query);
    const Eigen::MatrixXd key = affine(h, blk.w_key, blk.b_key);
    const Eigen::MatrixXd val = affine(h, blk.w_value, blk.b_value);
    add_matmul_ops(q.rows(), q.cols(), key.rows());
    const Eigen::MatrixXd scores = scale * (q * key.transpose());
    const Eigen::MatrixXd attn = softmax_rows(scores);
    add_matmul_ops(attn.rows(), attn.cols(), val.cols());
    const Eigen::MatrixXd mixed = attn * val;
    const Eigen::MatrixXd post_attn =
        h + affine(mixed, blk.w_out, blk.b_out);
    Eigen::MatrixXd f1 = affine(post_attn, blk.w_ffn1, blk.b_ffn1);
    f1 = f1.array().tanh();
    const Eigen::MatrixXd out =
        post_attn + affine(f1, blk.w_ffn2, blk.b_ffn2);
    opcount::add(static_cast<std::uint64_t>(3 * out.size()));
    require_finite(out, "attention block " + std::to_string(k));
    if (cache != nullptr) {
      auto& bc = cache->blocks[k];
      bc.input = h;
      bc.query = q;
      bc.key = key;
      bc.value = val;
      bc.attn = attn;
      bc.mixed = mixed;
      bc.post_attn = post_attn;
      bc.ffn_mid = f1;
      bc.output = out;
    }
    h = out;
  }

  const Eigen::MatrixXd y = affine(h, params.w_head, params.b_head);
  require_finite(y, "head");
  opcount::add(static_cast<std::uint64_t>(y.rows()));
  if (cache != nullptr) cache->valid = true;
  return kFeatureScaleKw * y.col(0);
}

ModelParams backward(const ModelParams& params, const ForwardCache& cache,
                     const DecisionVector& upstream) {
  if (!cache.valid) {
    throw std::logic_error("backward: missing or stale forward cache");
  }
  if (cache.hyper != params.hyper ||
      cache.blocks.size() != params.blocks.size()) {
    throw std::logic_error("backward: cache does not match parameters");
  }
  if (upstream.size() != cache.n_agents) {
    throw DimensionError("backward: upstream gradient length mismatch");
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(params.hyper.d_h));
  ModelParams grads = ModelParams::zeros(params.hyper);

  // Head: y = h * w_head + b_head, v = kFeatureScaleKw * y.
  const Eigen::MatrixXd& h_final = params.blocks.empty()
                                       ? cache.embed_out
                                       : cache.blocks.back().output;
  Eigen::MatrixXd dy = kFeatureScaleKw * upstream;
  grads.w_head = h_final.transpose() * dy;
  grads.b_head = dy.colwise().sum().transpose();
  Eigen::MatrixXd dh = dy * params.w_head.transpose();

  for (int k = static_cast<int>(params.blocks.size()) - 1; k >= 0; --k) {
    const auto& blk = params.blocks[static_cast<std::size_t>(k)];
    const auto& bc = cache.blocks[static_cast<std::size_t>(k)];
    auto& g = grads.blocks[static_cast<std::size_t>(k)];

    // out = post_attn + f1 * w_ffn2 + b_ffn2, f1 = tanh(post_attn*w_ffn1 + b).
    Eigen::MatrixXd d_post = dh;
    const Eigen::MatrixXd& df2 = dh;
    g.w_ffn2 = bc.ffn_mid.transpose() * df2;
    g.b_ffn2 = df2.colwise().sum().transpose();
    const Eigen::MatrixXd df1 = df2 * blk.w_ffn2.transpose();
    const Eigen::MatrixXd dz1 =
        df1.array() * (1.0 - bc.ffn_mid.array().square());
    g.w_ffn1 = bc.post_attn.transpose() * dz1;
    g.b_ffn1 = dz1.colwise().sum().transpose();
    d_post += dz1 * blk.w_ffn1.transpose();

    // post_attn = input + (attn * value) * w_out + b_out.
    Eigen::MatrixXd d_in = d_post;
    const Eigen::MatrixXd& d_o = d_post;
    g.w_out = bc.mixed.transpose() * d_o;
    g.b_out = d_o.colwise().sum().transpose();
    const Eigen::MatrixXd d_mixed = d_o * blk.w_out.transpose();
    const Eigen::MatrixXd d_attn = d_mixed * bc.value.transpose();
    const Eigen::MatrixXd d_value = bc.attn.transpose() * d_mixed;

    // Row-wise softmax backward.
    Eigen::MatrixXd d_scores(bc.attn.rows(), bc.attn.cols());
    for (Eigen::Index i = 0; i < bc.attn.rows(); ++i) {
      const double dot = d_attn.row(i).dot(bc.attn.row(i));
      d_scores.row(i) =
          bc.attn.row(i).array() * (d_attn.row(i).array() - dot);
    }

    // scores = scale * query * key^T.
    const Eigen::MatrixXd d_query = scale * (d_scores * bc.key);
    const Eigen::MatrixXd d_key = scale * (d_scores.transpose() * bc.query);

    g.w_query = bc.input.transpose() * d_query;
    g.b_query = d_query.colwise().sum().transpose();
    g.w_key = bc.input.transpose() * d_key;
    g.b_key = d_key.colwise().sum().transpose();
    g.w_value = bc.input.transpose() * d_value;
    g.b_value = d_value.colwise().sum().transpose();
    d_in += d_query * blk.w_query.transpose();
    d_in += d_key * blk.w_key.transpose();
    d_in += d_value * blk.w_value.transpose();
    dh = d_in;
  }

  // Embedding: h = tanh(e1 * w2 + b2), e1 = tanh(x * w1 + b1).
  const Eigen::MatrixXd dz2 =
      dh.array() * (1.0 - cache.embed_out.array().square());
  grads.w_embed2 = cache.embed_mid.transpose() * dz2;
  grads.b_embed2 = dz2.colwise().sum().transpose();
  const Eigen::MatrixXd de1 = dz2 * params.w_embed2.transpose();
  const Eigen::MatrixXd dz1 =
      de1.array() * (1.0 - cache.embed_mid.array().square());
  grads.w_embed1 = cache.inputs.transpose() * dz1;
  grads.b_embed1 = dz1.colwise().sum().transpose();
  return grads;
}

namespace {

constexpr char kCheckpointMagic[8] = {'V', 'P', 'N', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kCheckpointVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::istream& is, const char* what) {
  std::uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(v))) {
    throw std::runtime_error(std::string("checkpoint: truncated ") + what);
  }
  return v;
}

void write_string(std::ostream& os, const std::string& s) {
  write_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& is, const char* what) {
  const std::uint32_t len = read_u32(is, what);
  std::string s(len, '\0');
  if (!is.read(s.data(), len)) {
    throw std::runtime_error(std::string("checkpoint: truncated ") + what);
  }
  return s;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& params,
                     const std::string& metadata) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("checkpoint: cannot write " + path);
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  write_u32(os, kCheckpointVersion);
  write_string(os, metadata);
  write_u32(os, static_cast<std::uint32_t>(params.hyper.d_in));
  write_u32(os, static_cast<std::uint32_t>(params.hyper.d_h));
  write_u32(os, static_cast<std::uint32_t>(params.hyper.n_blocks));
  write_u32(os, static_cast<std::uint32_t>(params.hyper.d_out));

  std::uint32_t n_tensors = 0;
  for_each_tensor(const_cast<ModelParams&>(params),
                  [&](const std::string&, auto&) { ++n_tensors; });
  write_u32(os, n_tensors);
  for_each_tensor(
      const_cast<ModelParams&>(params),
      [&](const std::string& name, auto& tensor) {
        write_string(os, name);
        write_u32(os, static_cast<std::uint32_t>(tensor.rows()));
        write_u32(os, static_cast<std::uint32_t>(tensor.cols()));
        os.write(reinterpret_cast<const char*>(tensor.data()),
                 static_cast<std::streamsize>(sizeof(double) * tensor.size()));
      });
  if (!os) throw std::runtime_error("checkpoint: write failed " + path);
}

std::pair<ModelParams, std::string> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot read " + path);
  char magic[8];
  if (!is.read(magic, sizeof(magic)) ||
      std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw std::runtime_error("checkpoint: bad magic in " + path);
  }
  const std::uint32_t version = read_u32(is, "version");
  if (version != kCheckpointVersion) {
    throw std::runtime_error("checkpoint: unsupported format version " +
                             std::to_string(version));
  }
  const std::string metadata = read_string(is, "metadata");
  HyperParams hyper;
  hyper.d_in = static_cast<int>(read_u32(is, "d_in"));
  hyper.d_h = static_cast<int>(read_u32(is, "d_h"));
  hyper.n_blocks = static_cast<int>(read_u32(is, "n_blocks"));
  hyper.d_out = static_cast<int>(read_u32(is, "d_out"));
  hyper.validate();
  ModelParams params = ModelParams::zeros(hyper);

  const std::uint32_t n_tensors = read_u32(is, "tensor count");
  std::uint32_t seen = 0;
  for_each_tensor(params, [&](const std::string& name, auto& tensor) {
    const std::string stored = read_string(is, "tensor name");
    if (stored != name) {
      throw std::runtime_error("checkpoint: expected tensor '" + name +
                               "', found '" + stored + "'");
    }
    const std::uint32_t rows = read_u32(is, "tensor rows");
    const std::uint32_t cols = read_u32(is, "tensor cols");
    if (rows != static_cast<std::uint32_t>(tensor.rows()) ||
        cols != static_cast<std::uint32_t>(tensor.cols())) {
      throw std::runtime_error("checkpoint: shape mismatch for tensor '" +
                               name + "'");
    }
    if (!is.read(reinterpret_cast<char*>(tensor.data()),
                 static_cast<std::streamsize>(sizeof(double) * tensor.size()))) {
      throw std::runtime_error("checkpoint: truncated tensor '" + name + "'");
    }
    ++seen;
  });
  if (seen != n_tensors) {
    throw std::runtime_error("checkpoint: tensor count mismatch");
  }
  return {std::move(params), metadata};
}

}  // namespace vppnet
