#include "treeeic/nn.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <string>

#include "treeeic/cluster_losses.hpp"

namespace treeeic {

namespace {

void apply(Activation act, Matrix& m) {
    if (act == Activation::relu) {
        m = m.cwiseMax(0.0);
    }
}

struct MlpTrace {
    std::vector<Matrix> inputs;  // input of each layer
    std::vector<Matrix> pre;     // pre-activation of each layer
};

Matrix forward_traced(const Mlp& mlp, const Matrix& x, MlpTrace& trace) {
    trace.inputs.clear();
    trace.pre.clear();
    Matrix h = x;
    for (const auto& layer : mlp.layers) {
        trace.inputs.push_back(h);
        Matrix pre = h * layer.weight;
        pre.rowwise() += layer.bias.row(0);
        trace.pre.push_back(pre);
        apply(layer.activation, pre);
        h = std::move(pre);
    }
    return h;
}

// Accumulates weight/bias gradients into grads[offset + 2l], grads[offset + 2l + 1]; returns dL/dinput.
Matrix backward_mlp(const Mlp& mlp, const MlpTrace& trace, Matrix dout, std::vector<Matrix>& grads,
                    std::size_t offset) {
    for (std::size_t l = mlp.layers.size(); l-- > 0;) {
        const auto& layer = mlp.layers[l];
        if (layer.activation == Activation::relu) {
            dout = dout.cwiseProduct((trace.pre[l].array() > 0.0).cast<double>().matrix());
        }
        grads[offset + 2 * l].noalias() += trace.inputs[l].transpose() * dout;
        grads[offset + 2 * l + 1] += dout.colwise().sum();
        if (l > 0) {
            dout = dout * layer.weight.transpose();
        } else {
            return dout * layer.weight.transpose();
        }
    }
    return dout;
}

void check_input(const Mlp& mlp, const Matrix& x, const char* what) {
    if (x.cols() != mlp.input_dim()) {
        throw ContractError(std::string(what) + ": input has " + std::to_string(x.cols()) + " columns, expected " +
                            std::to_string(mlp.input_dim()));
    }
}

}  // namespace

Matrix Mlp::forward(const Matrix& x) const {
    Matrix h = x;
    for (const auto& layer : layers) {
        Matrix pre = h * layer.weight;
        pre.rowwise() += layer.bias.row(0);
        apply(layer.activation, pre);
        h = std::move(pre);
    }
    return h;
}

Mlp make_mlp(const std::vector<int>& dims, RngStream& rng) {
    if (dims.size() < 2) {
        throw ContractError("make_mlp: need at least input and output widths");
    }
    Mlp mlp;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const int in = dims[l];
        const int out = dims[l + 1];
        if (in < 1 || out < 1) {
            throw ContractError("make_mlp: layer widths must be positive");
        }
        const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
        DenseLayer layer;
        layer.weight.resize(in, out);
        for (Eigen::Index i = 0; i < layer.weight.size(); ++i) {
            layer.weight.data()[i] = (2.0 * rng.uniform() - 1.0) * limit;
        }
        layer.bias = Matrix::Zero(1, out);
        layer.activation = (l + 2 == dims.size()) ? Activation::linear : Activation::relu;
        mlp.layers.push_back(std::move(layer));
    }
    return mlp;
}

ViewModel make_view_model(int input_dim, int n_clusters, const Architecture& arch, RngStream& rng,
                          double learning_rate) {
    if (n_clusters < 2) {
        throw ContractError("make_view_model: K must be at least 2");
    }
    std::vector<int> enc{input_dim};
    enc.insert(enc.end(), arch.hidden.begin(), arch.hidden.end());
    enc.push_back(arch.embed_dim);
    std::vector<int> dec(enc.rbegin(), enc.rend());

    ViewModel model;
    model.encoder = make_mlp(enc, rng);
    model.decoder = make_mlp(dec, rng);
    model.centroids = Matrix::Zero(n_clusters, arch.embed_dim);
    model.adam.lr = learning_rate;
    return model;
}

std::vector<Matrix*> parameter_list(ViewModel& model) {
    std::vector<Matrix*> out;
    for (Mlp* mlp : {&model.encoder, &model.decoder}) {
        for (auto& layer : mlp->layers) {
            out.push_back(&layer.weight);
            out.push_back(&layer.bias);
        }
    }
    out.push_back(&model.centroids);
    return out;
}

std::vector<const Matrix*> parameter_list(const ViewModel& model) {
    auto mut = parameter_list(const_cast<ViewModel&>(model));
    return {mut.begin(), mut.end()};
}

ViewGradients ViewGradients::zeros_like(const ViewModel& model) {
    ViewGradients g;
    for (const Matrix* p : parameter_list(model)) {
        g.params.push_back(Matrix::Zero(p->rows(), p->cols()));
    }
    return g;
}

void ViewGradients::scale(double c) {
    for (auto& p : params) p *= c;
}

Matrix encode(const ViewModel& model, const Matrix& x) {
    check_input(model.encoder, x, "encode");
    return model.encoder.forward(x);
}

Matrix decode(const ViewModel& model, const Matrix& z) {
    check_input(model.decoder, z, "decode");
    return model.decoder.forward(z);
}

Matrix soft_assign(const Matrix& z, const Matrix& centroids) {
    if (z.cols() != centroids.cols()) {
        throw ContractError("soft_assign: embedding and centroid widths differ");
    }
    Matrix w = pairwise_sqdist(z, centroids);
    w = (1.0 + w.array()).inverse().matrix();
    const Eigen::VectorXd total = w.rowwise().sum();
    return w.array().colwise() / total.array();
}

Matrix soft_assign_backward(const Matrix& z, const Matrix& centroids, const Matrix& q, const Matrix& dq,
                            Matrix& d_centroids) {
    const Matrix w = (1.0 + pairwise_sqdist(z, centroids).array()).inverse().matrix();
    const Eigen::VectorXd total = w.rowwise().sum();
    // dL/dw_il = (dq_il - sum_k dq_ik q_ik) / W_i ; dL/ds_il = -w_il^2 dL/dw_il
    const Eigen::VectorXd centre = dq.cwiseProduct(q).rowwise().sum();
    Matrix gw = dq;
    gw.colwise() -= centre;
    gw.array().colwise() /= total.array();
    const Matrix gs = -(w.array().square() * gw.array()).matrix();

    const Eigen::VectorXd gs_row = gs.rowwise().sum();
    Matrix dz = 2.0 * (z.array().colwise() * gs_row.array()).matrix() - 2.0 * gs * centroids;
    const RowVector gs_col = gs.colwise().sum();
    d_centroids += -2.0 * (gs.transpose() * z) + 2.0 * (centroids.array().colwise() * gs_col.transpose().array()).matrix();
    return dz;
}

Matrix embed_observed(const ViewModel& model, const Matrix& x, const MaskMatrix& mask, std::size_t v) {
    const auto ids = mask.observed(v);
    const Matrix z = encode(model, take_rows(x, ids));
    Matrix out = Matrix::Zero(x.rows(), z.cols());
    for (std::size_t r = 0; r < ids.size(); ++r) {
        out.row(static_cast<Eigen::Index>(ids[r])) = z.row(static_cast<Eigen::Index>(r));
    }
    return out;
}

Matrix assign_observed(const ViewModel& model, const Matrix& x, const MaskMatrix& mask, std::size_t v) {
    const auto ids = mask.observed(v);
    const Matrix q = soft_assign(encode(model, take_rows(x, ids)), model.centroids);
    Matrix out = Matrix::Zero(x.rows(), q.cols());
    for (std::size_t r = 0; r < ids.size(); ++r) {
        out.row(static_cast<Eigen::Index>(ids[r])) = q.row(static_cast<Eigen::Index>(r));
    }
    return out;
}

double reconstruction_loss(const std::vector<ViewModel>& models, const MultiViewDataset& ds, const MaskMatrix& mask) {
    if (models.size() != ds.n_views()) {
        throw ContractError("reconstruction_loss: one model per view required");
    }
    double total = 0.0;
    for (std::size_t v = 0; v < models.size(); ++v) {
        const Matrix x = take_rows(ds.views[v], mask.observed(v));
        total += (decode(models[v], encode(models[v], x)) - x).squaredNorm();
    }
    return total;
}

ViewLoss backward(const ViewModel& model, const Matrix& x, const Matrix* teacher, const LossSpec& spec,
                  ViewGradients* grad, Diagnostics* diag) {
    check_input(model.encoder, x, "backward");
    const std::size_t n_enc = 2 * model.encoder.layers.size();

    MlpTrace enc_trace;
    MlpTrace dec_trace;
    const Matrix z = forward_traced(model.encoder, x, enc_trace);
    const Matrix x_hat = forward_traced(model.decoder, z, dec_trace);

    ViewLoss loss;
    loss.rec = (x_hat - x).squaredNorm();

    Matrix dz = Matrix::Zero(z.rows(), z.cols());
    if (grad && spec.lambda_rec != 0.0) {
        dz += backward_mlp(model.decoder, dec_trace, 2.0 * spec.lambda_rec * (x_hat - x), grad->params, n_enc);
    }

    if (teacher) {
        if (teacher->rows() != x.rows() || teacher->cols() != model.centroids.rows()) {
            throw ContractError("backward: teacher shape does not match batch");
        }
        const Matrix q = soft_assign(z, model.centroids);
        Matrix dq = Matrix::Zero(q.rows(), q.cols());
        Matrix part;
        loss.cons = consistency_rows(*teacher, q, grad ? &part : nullptr);
        if (grad && spec.lambda_cons != 0.0) {
            dq += spec.lambda_cons * part;
        }
        if (q.rows() >= 2) {
            loss.disc = infonce_columns(*teacher, q, spec.temperature, grad ? &part : nullptr, diag);
            if (grad && spec.lambda_disc != 0.0) {
                dq += spec.lambda_disc * part;
            }
        }
        if (grad && (spec.lambda_cons != 0.0 || spec.lambda_disc != 0.0)) {
            dz += soft_assign_backward(z, model.centroids, q, dq, grad->params.back());
        }
    }

    if (grad) {
        backward_mlp(model.encoder, enc_trace, dz, grad->params, 0);
    }
    return loss;
}

void permute_clusters(ViewModel& model, const std::vector<int>& order) {
    const int k = model.n_clusters();
    std::vector<char> seen(static_cast<std::size_t>(k), 0);
    if (order.size() != static_cast<std::size_t>(k)) throw ContractError("permute_clusters: order must list K entries");
    for (int c : order) {
        if (c < 0 || c >= k || seen[static_cast<std::size_t>(c)]) {
            throw ContractError("permute_clusters: order is not a permutation");
        }
        seen[static_cast<std::size_t>(c)] = 1;
    }
    auto apply = [&](Matrix& m) {
        const Matrix old = m;
        for (int a = 0; a < k; ++a) m.row(a) = old.row(order[static_cast<std::size_t>(a)]);
    };
    apply(model.centroids);
    if (!model.adam.m.empty()) {
        apply(model.adam.m.back());
        apply(model.adam.v.back());
    }
}

void adam_step(ViewModel& model, const ViewGradients& grad) {
    auto params = parameter_list(model);
    if (grad.params.size() != params.size()) {
        throw ContractError("adam_step: gradient count does not match parameters");
    }
    AdamState& s = model.adam;
    if (s.m.empty()) {
        for (const Matrix* p : params) {
            s.m.push_back(Matrix::Zero(p->rows(), p->cols()));
            s.v.push_back(Matrix::Zero(p->rows(), p->cols()));
        }
    }
    ++s.step;
    const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
    const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const Matrix& g = grad.params[i];
        if (g.rows() != params[i]->rows() || g.cols() != params[i]->cols()) {
            throw ContractError("adam_step: gradient shape mismatch at parameter " + std::to_string(i));
        }
        s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * g;
        s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * g.cwiseProduct(g);
        params[i]->array() -= s.lr * (s.m[i].array() / c1) / ((s.v[i].array() / c2).sqrt() + s.eps);
    }
}

std::vector<double> pretrain(std::vector<ViewModel>& models, const MultiViewDataset& ds, const MaskMatrix& mask,
                             const PretrainOptions& opts, RngStream& rng) {
    if (opts.epochs < 1) {
        throw ContractError("pretrain: epochs must be at least 1");
    }
    if (opts.batch_size < 1) {
        throw ContractError("pretrain: batch size must be positive");
    }
    if (models.size() != ds.n_views()) {
        throw ContractError("pretrain: one model per view required");
    }
    const std::size_t n = ds.n_samples();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    const LossSpec spec;
    std::vector<double> trace;
    std::vector<std::size_t> rows;
    for (int epoch = 0; epoch < opts.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(opts.batch_size)) {
            const std::size_t stop = std::min(n, start + static_cast<std::size_t>(opts.batch_size));
            for (std::size_t v = 0; v < models.size(); ++v) {
                rows.clear();
                for (std::size_t b = start; b < stop; ++b) {
                    if (mask.available(order[b], v)) rows.push_back(order[b]);
                }
                if (rows.empty()) continue;
                ViewGradients g = ViewGradients::zeros_like(models[v]);
                epoch_loss += backward(models[v], take_rows(ds.views[v], rows), nullptr, spec, &g).rec;
                adam_step(models[v], g);
            }
        }
        trace.push_back(epoch_loss);
    }
    return trace;
}

void init_centroids(std::vector<ViewModel>& models, const MultiViewDataset& ds, const MaskMatrix& mask, int k,
                    RngStream& rng, const KMeansOptions& opts) {
    for (std::size_t v = 0; v < models.size(); ++v) {
        const auto ids = mask.observed(v);
        if (ids.size() < static_cast<std::size_t>(k)) {
            throw ContractError("init_centroids: view " + std::to_string(v) + " has " + std::to_string(ids.size()) +
                                " observed samples for " + std::to_string(k) + " clusters");
        }
        RngStream child = rng.split();
        models[v].centroids = kmeans(encode(models[v], take_rows(ds.views[v], ids)), k, child, opts).centroids;
    }
}

namespace {

constexpr char kMagic[8] = {'T', 'R', 'E', 'E', 'E', 'I', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw LoadError("checkpoint truncated");
    return value;
}

void put_matrix(std::ostream& out, const Matrix& m) {
    out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * m.size()));
}

void get_matrix(std::istream& in, Matrix& m) {
    in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * m.size()));
    if (!in) throw LoadError("checkpoint truncated");
}

void put_shape(std::ostream& out, const Mlp& mlp) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(mlp.layers.size()));
    for (const auto& l : mlp.layers) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(l.weight.rows()));
        put<std::uint32_t>(out, static_cast<std::uint32_t>(l.weight.cols()));
        put<std::uint8_t>(out, l.activation == Activation::relu ? 1 : 0);
    }
}

Mlp get_shape(std::istream& in) {
    Mlp mlp;
    const auto n = get<std::uint32_t>(in);
    for (std::uint32_t i = 0; i < n; ++i) {
        DenseLayer l;
        const auto rows = get<std::uint32_t>(in);
        const auto cols = get<std::uint32_t>(in);
        l.weight.resize(rows, cols);
        l.bias.resize(1, cols);
        l.activation = get<std::uint8_t>(in) ? Activation::relu : Activation::linear;
        mlp.layers.push_back(std::move(l));
    }
    return mlp;
}

}  // namespace

// Layout: magic, version, view count, then per view its shapes, Adam scalars, parameters and
// (if present) Adam moments. Values are stored in host byte order.
void save_checkpoint(const std::filesystem::path& path, const std::vector<ViewModel>& models) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw LoadError(path.string() + ": cannot open for writing");
    out.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(out, kVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(models.size()));
    for (const auto& m : models) {
        put_shape(out, m.encoder);
        put_shape(out, m.decoder);
        put<std::uint32_t>(out, static_cast<std::uint32_t>(m.centroids.rows()));
        put<std::uint32_t>(out, static_cast<std::uint32_t>(m.centroids.cols()));
        put<std::int64_t>(out, m.adam.step);
        put<double>(out, m.adam.lr);
        put<double>(out, m.adam.beta1);
        put<double>(out, m.adam.beta2);
        put<double>(out, m.adam.eps);
        put<std::uint8_t>(out, m.adam.m.empty() ? 0 : 1);
        for (const Matrix* p : parameter_list(m)) put_matrix(out, *p);
        for (std::size_t i = 0; i < m.adam.m.size(); ++i) {
            put_matrix(out, m.adam.m[i]);
            put_matrix(out, m.adam.v[i]);
        }
    }
    if (!out) throw LoadError(path.string() + ": write failed");
}

std::vector<ViewModel> load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError(path.string() + ": cannot open");
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw LoadError(path.string() + ": not a checkpoint file");
    }
    if (get<std::uint32_t>(in) != kVersion) {
        throw LoadError(path.string() + ": unsupported checkpoint version");
    }
    std::vector<ViewModel> models(get<std::uint32_t>(in));
    for (auto& m : models) {
        m.encoder = get_shape(in);
        m.decoder = get_shape(in);
        const auto k = get<std::uint32_t>(in);
        const auto d = get<std::uint32_t>(in);
        m.centroids.resize(k, d);
        m.adam.step = get<std::int64_t>(in);
        m.adam.lr = get<double>(in);
        m.adam.beta1 = get<double>(in);
        m.adam.beta2 = get<double>(in);
        m.adam.eps = get<double>(in);
        const bool has_moments = get<std::uint8_t>(in) != 0;
        for (Matrix* p : parameter_list(m)) get_matrix(in, *p);
        if (has_moments) {
            for (const Matrix* p : parameter_list(m)) {
                m.adam.m.emplace_back(p->rows(), p->cols());
                m.adam.v.emplace_back(p->rows(), p->cols());
                get_matrix(in, m.adam.m.back());
                get_matrix(in, m.adam.v.back());
            }
        }
    }
    return models;
}

}  // namespace treeeic
