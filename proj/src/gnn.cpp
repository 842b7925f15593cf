#include "boostfgl/gnn.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

namespace boostfgl {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

ModelParams ModelParams::zeros(int d, int h, int c) {
    ModelParams p;
    p.w0 = Matrix::Zero(d, h);
    p.b0 = Vector::Zero(h);
    p.w1 = Matrix::Zero(h, c);
    p.b1 = Vector::Zero(c);
    return p;
}

ModelParams ModelParams::init(int d, int h, int c, Rng& rng) {
    ModelParams p = zeros(d, h, c);
    auto glorot = [&](Matrix& m) {
        double s = std::sqrt(6.0 / (double)(m.rows() + m.cols()));
        for (long i = 0; i < m.rows(); ++i) {
            for (long j = 0; j < m.cols(); ++j) m(i, j) = rng.uniform(-s, s);
        }
    };
    glorot(p.w0);
    glorot(p.w1);
    return p;
}

void ModelParams::set_zero() {
    w0.setZero();
    b0.setZero();
    w1.setZero();
    b1.setZero();
}

bool ModelParams::all_finite() const {
    return w0.allFinite() && b0.allFinite() && w1.allFinite() && b1.allFinite();
}

double ModelParams::squared_norm() const {
    return w0.squaredNorm() + b0.squaredNorm() + w1.squaredNorm() +
           b1.squaredNorm();
}

double ModelParams::norm() const { return std::sqrt(squared_norm()); }

double ModelParams::dot(const ModelParams& o) const {
    return (w0.array() * o.w0.array()).sum() +
           (b0.array() * o.b0.array()).sum() +
           (w1.array() * o.w1.array()).sum() +
           (b1.array() * o.b1.array()).sum();
}

void ModelParams::axpy(double a, const ModelParams& o) {
    w0 += a * o.w0;
    b0 += a * o.b0;
    w1 += a * o.w1;
    b1 += a * o.b1;
}

void ModelParams::scale(double a) {
    w0 *= a;
    b0 *= a;
    w1 *= a;
    b1 *= a;
}

ModelParams& ModelParams::operator+=(const ModelParams& o) {
    axpy(1.0, o);
    return *this;
}

ModelParams& ModelParams::operator-=(const ModelParams& o) {
    axpy(-1.0, o);
    return *this;
}

AggGraph AggGraph::build(const AttributedGraph& g, std::span<const double> beta) {
    if (!beta.empty() && beta.size() != g.in_src.size()) {
        throw ContractError("edge weight table does not match in-edge count");
    }
    AggGraph a;
    a.n = g.num_nodes;
    a.ptr.assign(a.n + 1, 0);
    a.src.reserve(g.in_src.size() + a.n);
    a.w.reserve(g.in_src.size() + a.n);
    for (int v = 0; v < a.n; ++v) {
        int begin = g.in_ptr[v], end = g.in_ptr[v + 1];
        double sum = 0.0;
        int kept = 0;
        for (int e = begin; e < end; ++e) {
            double r = beta.empty() ? 1.0 : beta[e];
            if (r <= 0.0) continue;
            sum += r;
            ++kept;
        }
        if (kept == 0) {
            a.src.push_back(v);
            a.w.push_back(1.0);
        } else {
            double self_raw = sum / kept;
            double denom = sum + self_raw;
            for (int e = begin; e < end; ++e) {
                double r = beta.empty() ? 1.0 : beta[e];
                if (r <= 0.0) continue;
                a.src.push_back(g.in_src[e]);
                a.w.push_back(r / denom);
            }
            a.src.push_back(v);
            a.w.push_back(self_raw / denom);
        }
        a.ptr[v + 1] = static_cast<int>(a.src.size());
    }
    return a;
}

Matrix AggGraph::apply(const Matrix& h) const {
    Matrix out = Matrix::Zero(n, h.cols());
    for (int v = 0; v < n; ++v) {
        for (int e = ptr[v]; e < ptr[v + 1]; ++e) {
            out.row(v) += w[e] * h.row(src[e]);
        }
    }
    return out;
}

Matrix AggGraph::apply_transpose(const Matrix& g) const {
    Matrix out = Matrix::Zero(n, g.cols());
    for (int v = 0; v < n; ++v) {
        for (int e = ptr[v]; e < ptr[v + 1]; ++e) {
            out.row(src[e]) += w[e] * g.row(v);
        }
    }
    return out;
}

Matrix gnn_forward(const ModelParams& p, const AggGraph& agg, const Matrix& x,
                   bool train_mode, double dropout_rate, Rng* rng,
                   ForwardCache* cache) {
    if (x.cols() != p.w0.rows() || x.rows() != agg.n) {
        throw ContractError("feature matrix shape does not match model/graph");
    }
    Matrix agg_x = agg.apply(x);
    Matrix z0 = (agg_x * p.w0).rowwise() + p.b0.transpose();
    Matrix h1 = z0.cwiseMax(0.0);
    Matrix mask;
    Matrix h1d;
    if (train_mode && dropout_rate > 0.0) {
        if (rng == nullptr) {
            throw ContractError("train-mode forward with dropout needs an rng");
        }
        double keep = 1.0 - dropout_rate;
        mask.resize(h1.rows(), h1.cols());
        for (long i = 0; i < h1.rows(); ++i) {
            for (long j = 0; j < h1.cols(); ++j) {
                mask(i, j) = rng->uniform() < keep ? 1.0 / keep : 0.0;
            }
        }
        h1d = h1.cwiseProduct(mask);
    } else {
        h1d = h1;
    }
    Matrix agg_h = agg.apply(h1d);
    Matrix logits = (agg_h * p.w1).rowwise() + p.b1.transpose();
    if (cache) {
        cache->agg_x = std::move(agg_x);
        cache->z0 = std::move(z0);
        cache->h1 = std::move(h1);
        cache->h1d = std::move(h1d);
        cache->agg_h = std::move(agg_h);
        cache->logits = logits;
        cache->mask = std::move(mask);
        cache->train_mode = train_mode && dropout_rate > 0.0;
    }
    return logits;
}

Matrix softmax_rows(const Matrix& logits) {
    Matrix out(logits.rows(), logits.cols());
    for (long i = 0; i < logits.rows(); ++i) {
        double mx = logits.row(i).maxCoeff();
        Eigen::RowVectorXd e = (logits.row(i).array() - mx).exp();
        out.row(i) = e / e.sum();
    }
    return out;
}

namespace {

// Stable -log softmax(z)[y].
double cross_entropy(const Eigen::Ref<const Eigen::RowVectorXd>& z, int y) {
    double mx = z.maxCoeff();
    double lse = std::log((z.array() - mx).exp().sum()) + mx;
    return lse - z(y);
}

}  // namespace

double weighted_loss(const Matrix& logits, const std::vector<int>& labels,
                     const std::vector<int>& loss_nodes, const Vector& alpha) {
    if (loss_nodes.empty()) {
        throw ContractError("empty objective: no labeled nodes to train on");
    }
    double total = 0.0;
    for (int v : loss_nodes) {
        if (labels[v] == kUnlabeled) {
            throw ContractError("loss node " + std::to_string(v) +
                                " is unlabeled");
        }
        total += alpha[v] * cross_entropy(logits.row(v), labels[v]);
    }
    return total;
}

ModelParams gnn_backward(const ModelParams& p, const AggGraph& agg,
                         const ForwardCache& cache,
                         const std::vector<int>& labels,
                         const std::vector<int>& loss_nodes,
                         const Vector& alpha) {
    const long n = cache.logits.rows();
    const long c = cache.logits.cols();
    if (static_cast<long>(labels.size()) != n) {
        throw ContractError("labels do not match forward cache");
    }
    Matrix g1 = Matrix::Zero(n, c);
    for (int v : loss_nodes) {
        if (labels[v] == kUnlabeled) {
            throw ContractError("loss node " + std::to_string(v) +
                                " is unlabeled");
        }
        Eigen::RowVectorXd row = cache.logits.row(v);
        double mx = row.maxCoeff();
        Eigen::RowVectorXd e = (row.array() - mx).exp();
        Eigen::RowVectorXd prob = e / e.sum();
        prob(labels[v]) -= 1.0;
        g1.row(v) = alpha[v] * prob;
    }

    ModelParams grad;
    grad.w1 = cache.agg_h.transpose() * g1;
    grad.b1 = g1.colwise().sum();

    Matrix gh1d = agg.apply_transpose(g1) * p.w1.transpose();
    if (cache.train_mode) gh1d = gh1d.cwiseProduct(cache.mask);
    Matrix gz0 =
        gh1d.cwiseProduct((cache.z0.array() > 0.0).cast<double>().matrix());

    grad.w0 = cache.agg_x.transpose() * gz0;
    grad.b0 = gz0.colwise().sum();
    return grad;
}

ModelParams per_node_gradient(const ModelParams& p, const AggGraph& agg,
                              const ForwardCache& cache, int label, int v) {
    if (label == kUnlabeled) {
        throw ContractError("per-node gradient requires a labeled node");
    }
    Eigen::RowVectorXd row = cache.logits.row(v);
    double mx = row.maxCoeff();
    Eigen::RowVectorXd e = (row.array() - mx).exp();
    Eigen::RowVectorXd g1 = e / e.sum();
    g1(label) -= 1.0;

    ModelParams grad =
        ModelParams::zeros((int)p.w0.rows(), (int)p.w0.cols(), (int)p.w1.cols());
    grad.w1 = cache.agg_h.row(v).transpose() * g1;
    grad.b1 = g1.transpose();

    Eigen::RowVectorXd back = g1 * p.w1.transpose();  // dL/d(h1d rows)
    for (int ei = agg.ptr[v]; ei < agg.ptr[v + 1]; ++ei) {
        int u = agg.src[ei];
        Eigen::RowVectorXd dz0 = agg.w[ei] * back;
        if (cache.train_mode) dz0 = dz0.cwiseProduct(cache.mask.row(u));
        dz0 = dz0.cwiseProduct(
            (cache.z0.row(u).array() > 0.0).cast<double>().matrix());
        grad.w0 += cache.agg_x.row(u).transpose() * dz0;
        grad.b0 += dz0.transpose();
    }
    return grad;
}

double per_node_grad_norm(const ModelParams& p, const AggGraph& agg,
                          const ForwardCache& cache, int label, int v) {
    return per_node_gradient(p, agg, cache, label, v).norm();
}

OptimizerState OptimizerState::zeros_like(const ModelParams& p) {
    OptimizerState s;
    s.m = ModelParams::zeros((int)p.w0.rows(), (int)p.w0.cols(),
                             (int)p.w1.cols());
    s.v = ModelParams::zeros((int)p.w0.rows(), (int)p.w0.cols(),
                             (int)p.w1.cols());
    return s;
}

namespace {

void adam_update(Matrix& theta, const Matrix& g, Matrix& m, Matrix& v,
                 const OptimizerConfig& c, double bc1, double bc2) {
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g.cwiseProduct(g);
    Matrix mhat = m / bc1;
    Matrix vhat = v / bc2;
    theta -= c.lr * (mhat.array() / (vhat.array().sqrt() + c.eps)).matrix();
    theta -= c.lr * c.weight_decay * theta;
}

void adam_update(Vector& theta, const Vector& g, Vector& m, Vector& v,
                 const OptimizerConfig& c, double bc1, double bc2) {
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g.cwiseProduct(g);
    Vector mhat = m / bc1;
    Vector vhat = v / bc2;
    theta -= c.lr * (mhat.array() / (vhat.array().sqrt() + c.eps)).matrix();
    theta -= c.lr * c.weight_decay * theta;
}

}  // namespace

void optimizer_step(ModelParams& params, const ModelParams& grad,
                    OptimizerState& state, const OptimizerConfig& cfg) {
    if (!grad.all_finite()) {
        throw DivergedError("non-finite gradient in optimizer step");
    }
    if (cfg.kind == OptimizerKind::Sgd) {
        params.axpy(-cfg.lr, grad);
        params.scale(1.0 - cfg.lr * cfg.weight_decay);
        return;
    }
    ++state.step;
    double bc1 = 1.0 - std::pow(cfg.beta1, (double)state.step);
    double bc2 = 1.0 - std::pow(cfg.beta2, (double)state.step);
    adam_update(params.w0, grad.w0, state.m.w0, state.v.w0, cfg, bc1, bc2);
    adam_update(params.b0, grad.b0, state.m.b0, state.v.b0, cfg, bc1, bc2);
    adam_update(params.w1, grad.w1, state.m.w1, state.v.w1, cfg, bc1, bc2);
    adam_update(params.b1, grad.b1, state.m.b1, state.v.b1, cfg, bc1, bc2);
}

std::vector<double> params_to_flat(const ModelParams& p) {
    std::vector<double> flat;
    flat.reserve(p.size());
    auto append = [&](const double* data, long count) {
        flat.insert(flat.end(), data, data + count);
    };
    append(p.w0.data(), p.w0.size());
    append(p.b0.data(), p.b0.size());
    append(p.w1.data(), p.w1.size());
    append(p.b1.data(), p.b1.size());
    return flat;
}

ModelParams params_from_flat(std::span<const double> flat, int d, int h, int c) {
    ModelParams p = ModelParams::zeros(d, h, c);
    if (static_cast<long>(flat.size()) != p.size()) {
        throw ContractError("flat parameter payload has wrong length");
    }
    const double* it = flat.data();
    std::memcpy(p.w0.data(), it, sizeof(double) * p.w0.size());
    it += p.w0.size();
    std::memcpy(p.b0.data(), it, sizeof(double) * p.b0.size());
    it += p.b0.size();
    std::memcpy(p.w1.data(), it, sizeof(double) * p.w1.size());
    it += p.w1.size();
    std::memcpy(p.b1.data(), it, sizeof(double) * p.b1.size());
    return p;
}

void save_checkpoint(const ModelParams& p, const std::string& path) {
    nlohmann::json header = {
        {"format", "boostfgl-params-v1"},
        {"d", p.w0.rows()},
        {"h", p.w0.cols()},
        {"c", p.w1.cols()},
        {"order", {"w0", "b0", "w1", "b1"}},
        {"layout", "col-major"},
        {"dtype", "f64-le"},
    };
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open " + path + " for writing");
    out << header.dump() << '\n';
    auto flat = params_to_flat(p);
    out.write(reinterpret_cast<const char*>(flat.data()),
              static_cast<std::streamsize>(flat.size() * sizeof(double)));
}

ModelParams load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path);
    std::string header_line;
    std::getline(in, header_line);
    auto header = nlohmann::json::parse(header_line);
    if (header.value("format", "") != "boostfgl-params-v1") {
        throw ParseError("unrecognized checkpoint format in " + path);
    }
    int d = header.at("d").get<int>();
    int h = header.at("h").get<int>();
    int c = header.at("c").get<int>();
    size_t count = static_cast<size_t>(d) * h + h + static_cast<size_t>(h) * c + c;
    std::vector<double> flat(count);
    in.read(reinterpret_cast<char*>(flat.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (static_cast<size_t>(in.gcount()) != count * sizeof(double)) {
        throw ParseError("truncated checkpoint payload in " + path);
    }
    return params_from_flat(flat, d, h, c);
}

}  // namespace boostfgl
