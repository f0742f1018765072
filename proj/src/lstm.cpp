#include "hlift/lstm.hpp"

#include "hlift/error.hpp"
#include "hlift/log.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace hlift {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// ---- parameter plumbing -------------------------------------------------------

Index NetworkParams::n_parameters() const {
    Index n = head.W.size() + head.b.size();
    for (const auto& l : layers) n += l.Wx.size() + l.Wh.size() + l.b.size();
    return n;
}

void NetworkParams::validate() const {
    require(!layers.empty(), ErrorKind::Shape, "network has no LSTM layers");
    require(dropout_rate >= 0.0 && dropout_rate < 1.0, ErrorKind::Domain, "dropout rate must lie in [0, 1)");
    Index in = layers.front().input_size();
    require(in >= 1, ErrorKind::Shape, "network input size must be >= 1");
    for (std::size_t k = 0; k < layers.size(); ++k) {
        const auto& l = layers[k];
        const Index H = l.hidden_size();
        const std::string where = "layer " + std::to_string(k);
        require(H >= 1, ErrorKind::Shape, where + ": hidden size must be >= 1");
        require(l.Wx.rows() == 4 * H && l.Wx.cols() == in, ErrorKind::Shape, where + ": Wx must be 4H x input");
        require(l.Wh.rows() == 4 * H && l.Wh.cols() == H, ErrorKind::Shape, where + ": Wh must be 4H x H");
        require(l.b.size() == 4 * H, ErrorKind::Shape, where + ": bias must have 4H entries");
        in = H;
    }
    require(head.W.cols() == in && head.W.rows() >= 1, ErrorKind::Shape, "head W must be out x last hidden");
    require(head.b.size() == head.W.rows(), ErrorKind::Shape, "head bias size mismatch");
}

namespace {

template <class M>
void put(VectorXd& flat, Index& off, const M& m) {
    flat.segment(off, m.size()) = Eigen::Map<const VectorXd>(m.data(), m.size());
    off += m.size();
}

template <class M>
void take(const VectorXd& flat, Index& off, M& m) {
    Eigen::Map<VectorXd>(m.data(), m.size()) = flat.segment(off, m.size());
    off += m.size();
}

} // namespace

VectorXd NetworkParams::pack() const {
    VectorXd flat(n_parameters());
    Index off = 0;
    for (const auto& l : layers) {
        put(flat, off, l.Wx);
        put(flat, off, l.Wh);
        put(flat, off, l.b);
    }
    put(flat, off, head.W);
    put(flat, off, head.b);
    return flat;
}

void NetworkParams::unpack(const VectorXd& flat) {
    require(flat.size() == n_parameters(), ErrorKind::Shape, "packed parameter vector has the wrong length");
    Index off = 0;
    for (auto& l : layers) {
        take(flat, off, l.Wx);
        take(flat, off, l.Wh);
        take(flat, off, l.b);
    }
    take(flat, off, head.W);
    take(flat, off, head.b);
}

NetworkParams NetworkParams::zeros_like() const {
    NetworkParams z = *this;
    for (auto& l : z.layers) {
        l.Wx.setZero();
        l.Wh.setZero();
        l.b.setZero();
    }
    z.head.W.setZero();
    z.head.b.setZero();
    return z;
}

NetworkParams init_network(const Architecture& arch, std::uint64_t seed) {
    require(arch.input_size >= 1 && arch.output_size >= 1, ErrorKind::Shape, "input/output sizes must be >= 1");
    require(!arch.hidden.empty(), ErrorKind::Shape, "at least one LSTM layer is required");
    Rng rng(derive_seed(seed, streams::init));
    auto xavier = [&](Index rows, Index cols, Index fan_in, Index fan_out) {
        const double limit = std::sqrt(6.0 / double(fan_in + fan_out));
        std::uniform_real_distribution<double> u(-limit, limit);
        MatrixXd m(rows, cols);
        for (Index c = 0; c < cols; ++c)
            for (Index r = 0; r < rows; ++r) m(r, c) = u(rng);
        return m;
    };

    NetworkParams net;
    net.dropout_rate = arch.dropout_rate;
    Index in = arch.input_size;
    for (Index H : arch.hidden) {
        require(H >= 1, ErrorKind::Shape, "hidden sizes must be >= 1");
        LstmLayer l;
        l.Wx = xavier(4 * H, in, in, 4 * H);
        l.Wh = xavier(4 * H, H, H, 4 * H);
        l.b = VectorXd::Zero(4 * H);
        l.b.segment(H, H).setOnes();
        net.layers.push_back(std::move(l));
        in = H;
    }
    net.head.W = xavier(arch.output_size, in, in, arch.output_size);
    net.head.b = VectorXd::Zero(arch.output_size);
    net.validate();
    return net;
}

MatrixXd sample_dropout_mask(Index rows, Index cols, double rate, Rng& rng) {
    require(rate >= 0.0 && rate < 1.0, ErrorKind::Domain, "dropout rate must lie in [0, 1)");
    MatrixXd mask(rows, cols);
    if (rate == 0.0) {
        mask.setOnes();
        return mask;
    }
    std::bernoulli_distribution keep(1.0 - rate);
    const double scale = 1.0 / (1.0 - rate);
    for (Index r = 0; r < rows; ++r)
        for (Index c = 0; c < cols; ++c) mask(r, c) = keep(rng) ? scale : 0.0;
    return mask;
}

// ---- forward / backward -------------------------------------------------------

namespace {

inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

struct LayerTrace {
    std::vector<VectorXd> x, i, f, g, o, c, tc, h;
};

void layer_forward(const LstmLayer& W, const std::vector<VectorXd>& inputs, LayerTrace& tr) {
    const Index H = W.hidden_size();
    const std::size_t L = inputs.size();
    tr.x = inputs;
    for (auto* v : {&tr.i, &tr.f, &tr.g, &tr.o, &tr.c, &tr.tc, &tr.h}) v->resize(L);
    VectorXd h = VectorXd::Zero(H);
    VectorXd c = VectorXd::Zero(H);
    VectorXd a(4 * H);
    for (std::size_t t = 0; t < L; ++t) {
        a.noalias() = W.Wx * inputs[t];
        a.noalias() += W.Wh * h;
        a += W.b;
        VectorXd gi = a.segment(0, H).unaryExpr(&sigmoid);
        VectorXd gf = a.segment(H, H).unaryExpr(&sigmoid);
        VectorXd gg = a.segment(2 * H, H).array().tanh();
        VectorXd go = a.segment(3 * H, H).unaryExpr(&sigmoid);
        c = gf.cwiseProduct(c) + gi.cwiseProduct(gg);
        VectorXd tc = c.array().tanh();
        h = go.cwiseProduct(tc);
        tr.i[t] = std::move(gi);
        tr.f[t] = std::move(gf);
        tr.g[t] = std::move(gg);
        tr.o[t] = std::move(go);
        tr.c[t] = c;
        tr.tc[t] = std::move(tc);
        tr.h[t] = h;
    }
}

// Backpropagation through time. `dh_ext[t]` is the gradient reaching h[t] from
// above; parameter gradients accumulate into G.
void layer_backward(const LstmLayer& W, const LayerTrace& tr, const std::vector<VectorXd>& dh_ext, LstmLayer& G,
                    std::vector<VectorXd>* dinputs) {
    const Index H = W.hidden_size();
    const std::size_t L = tr.h.size();
    if (dinputs) dinputs->assign(L, VectorXd());
    VectorXd dh_next = VectorXd::Zero(H);
    VectorXd dc_next = VectorXd::Zero(H);
    const VectorXd zero = VectorXd::Zero(H);
    VectorXd da(4 * H);
    for (std::size_t k = L; k-- > 0;) {
        const VectorXd& c_prev = k > 0 ? tr.c[k - 1] : zero;
        const VectorXd& h_prev = k > 0 ? tr.h[k - 1] : zero;
        const VectorXd dh = dh_ext[k] + dh_next;
        const auto& i = tr.i[k].array();
        const auto& f = tr.f[k].array();
        const auto& g = tr.g[k].array();
        const auto& o = tr.o[k].array();
        const auto& tc = tr.tc[k].array();
        const VectorXd dc = dc_next.array() + dh.array() * o * (1.0 - tc.square());
        da.segment(0, H) = dc.array() * g * i * (1.0 - i);
        da.segment(H, H) = dc.array() * c_prev.array() * f * (1.0 - f);
        da.segment(2 * H, H) = dc.array() * i * (1.0 - g.square());
        da.segment(3 * H, H) = dh.array() * tc * o * (1.0 - o);
        G.Wx.noalias() += da * tr.x[k].transpose();
        G.Wh.noalias() += da * h_prev.transpose();
        G.b += da;
        if (dinputs) (*dinputs)[k] = W.Wx.transpose() * da;
        dh_next = W.Wh.transpose() * da;
        dc_next = dc.cwiseProduct(tr.f[k]);
    }
}

struct NetTrace {
    std::vector<LayerTrace> layers;
    VectorXd last_hidden; // input to the head (after dropout when the top layer is the first)
    VectorXd out;
};

void check_window(const NetworkParams& net, const MatrixXd& X) {
    require(X.cols() == net.input_size(), ErrorKind::Shape,
            "window has " + std::to_string(X.cols()) + " features, network expects " + std::to_string(net.input_size()));
    require(X.rows() >= 1, ErrorKind::Shape, "empty window");
    require(X.allFinite(), ErrorKind::Numeric, "window contains non-finite values");
}

void net_forward(const NetworkParams& net, const MatrixXd& X, const MatrixXd* mask, NetTrace& tr) {
    const Index L = X.rows();
    std::vector<VectorXd> inputs(static_cast<std::size_t>(L));
    for (Index t = 0; t < L; ++t) inputs[std::size_t(t)] = X.row(t).transpose();
    tr.layers.resize(net.layers.size());
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        layer_forward(net.layers[l], inputs, tr.layers[l]);
        inputs = tr.layers[l].h;
        if (l == 0 && mask)
            for (Index t = 0; t < L; ++t) inputs[std::size_t(t)].array() *= mask->row(t).transpose().array();
    }
    tr.last_hidden = inputs.back();
    tr.out = net.head.W * tr.last_hidden + net.head.b;
    if (!tr.out.allFinite()) fail(ErrorKind::Numeric, "network produced a non-finite prediction");
}

void net_backward(const NetworkParams& net, const NetTrace& tr, const MatrixXd* mask, const VectorXd& dout,
                  NetworkParams* G, MatrixXd* dX) {
    const std::size_t L = tr.layers.front().h.size();
    if (G) {
        G->head.W.noalias() += dout * tr.last_hidden.transpose();
        G->head.b += dout;
    }
    std::vector<VectorXd> dh_ext(L, VectorXd::Zero(net.layers.back().hidden_size()));
    dh_ext.back() = net.head.W.transpose() * dout;

    NetworkParams scratch;
    if (!G) scratch = net.zeros_like();
    NetworkParams& grads = G ? *G : scratch;

    for (std::size_t l = net.layers.size(); l-- > 0;) {
        if (l == 0 && mask)
            for (std::size_t t = 0; t < L; ++t) dh_ext[t].array() *= mask->row(Index(t)).transpose().array();
        std::vector<VectorXd> dinp;
        const bool need_inputs = l > 0 || dX != nullptr;
        layer_backward(net.layers[l], tr.layers[l], dh_ext, grads.layers[l], need_inputs ? &dinp : nullptr);
        if (l > 0) dh_ext = std::move(dinp);
        else if (dX) {
            dX->resize(Index(L), net.input_size());
            for (std::size_t t = 0; t < L; ++t) dX->row(Index(t)) = dinp[t].transpose();
        }
    }
}

} // namespace

VectorXd forward(const NetworkParams& net, const MatrixXd& window) {
    check_window(net, window);
    NetTrace tr;
    net_forward(net, window, nullptr, tr);
    return tr.out;
}

VectorXd forward(const NetworkParams& net, const MatrixXd& window, const MatrixXd& mask) {
    check_window(net, window);
    require(mask.rows() == window.rows() && mask.cols() == net.layers.front().hidden_size(), ErrorKind::Shape,
            "dropout mask must be L x first hidden size");
    NetTrace tr;
    net_forward(net, window, &mask, tr);
    return tr.out;
}

VectorXd forward_dropout(const NetworkParams& net, const MatrixXd& window, Rng& rng) {
    const MatrixXd mask = sample_dropout_mask(window.rows(), net.layers.front().hidden_size(), net.dropout_rate, rng);
    return forward(net, window, mask);
}

MatrixXd input_gradient(const NetworkParams& net, const MatrixXd& window, Index output) {
    check_window(net, window);
    require(output >= 0 && output < net.output_size(), ErrorKind::Domain, "output index out of range");
    NetTrace tr;
    net_forward(net, window, nullptr, tr);
    VectorXd dout = VectorXd::Zero(net.output_size());
    dout[output] = 1.0;
    MatrixXd dX;
    net_backward(net, tr, nullptr, dout, nullptr, &dX);
    return dX;
}

LossGradient loss_and_gradient(const NetworkParams& net, const WindowedDataset& data,
                               const std::vector<MatrixXd>* masks) {
    require(data.size() >= 1, ErrorKind::Domain, "loss needs at least one sample");
    require(!masks || Index(masks->size()) == data.size(), ErrorKind::Shape, "one dropout mask per sample expected");
    require(data.n_features() == net.output_size(), ErrorKind::Shape, "target width differs from network output");
    NetworkParams G = net.zeros_like();
    const double inv_n = 1.0 / double(data.size());
    LossGradient out;
    NetTrace tr;
    for (Index s = 0; s < data.size(); ++s) {
        const MatrixXd& X = data.X[std::size_t(s)];
        check_window(net, X);
        const MatrixXd* mask = masks ? &(*masks)[std::size_t(s)] : nullptr;
        net_forward(net, X, mask, tr);
        const VectorXd err = tr.out - data.Y.row(s).transpose();
        out.loss += err.squaredNorm() * inv_n;
        net_backward(net, tr, mask, 2.0 * inv_n * err, &G, nullptr);
    }
    out.grad = G.pack();
    return out;
}

double mse(const NetworkParams& net, const WindowedDataset& data) {
    require(data.size() >= 1, ErrorKind::Domain, "loss needs at least one sample");
    double loss = 0.0;
    for (Index s = 0; s < data.size(); ++s)
        loss += (forward(net, data.X[std::size_t(s)]) - data.Y.row(s).transpose()).squaredNorm();
    return loss / double(data.size());
}

// ---- training -----------------------------------------------------------------

TrainResult train(const NetworkParams& init, const WindowedDataset& train_set, const WindowedDataset& val_set,
                  const TrainConfig& cfg) {
    init.validate();
    require(train_set.size() >= 1, ErrorKind::Domain, "training needs at least one training sample");
    require(val_set.size() >= 1, ErrorKind::Domain, "training needs at least one validation sample");
    require(cfg.patience >= 1, ErrorKind::Domain, "patience must be >= 1");
    require(cfg.max_epochs >= 1, ErrorKind::Domain, "max_epochs must be >= 1");
    require(cfg.learning_rate > 0.0, ErrorKind::Domain, "learning rate must be positive");

    std::vector<WindowedDataset> batches;
    const Index n = train_set.size();
    const Index bs = (cfg.batch_size <= 0 || cfg.batch_size >= n) ? n : Index(cfg.batch_size);
    for (Index start = 0; start < n; start += bs) {
        std::vector<Index> idx(std::size_t(std::min(bs, n - start)));
        std::iota(idx.begin(), idx.end(), start);
        batches.push_back(train_set.subset(idx));
    }

    NetworkParams params = init;
    VectorXd theta = params.pack();
    VectorXd m = VectorXd::Zero(theta.size());
    VectorXd v = VectorXd::Zero(theta.size());
    long step = 0;
    Rng rng(derive_seed(cfg.seed, streams::train_dropout));
    const Index L = train_set.X.front().rows();
    const Index H0 = params.layers.front().hidden_size();

    TrainResult res;
    TrainingTrace& trace = res.trace;
    trace.initial_val_loss = mse(params, val_set);
    double best = std::numeric_limits<double>::infinity();
    NetworkParams best_params = params;
    int wait = 0;

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        double epoch_loss = 0.0;
        for (const auto& batch : batches) {
            std::vector<MatrixXd> masks;
            const bool use_dropout = params.dropout_rate > 0.0;
            if (use_dropout)
                for (Index s = 0; s < batch.size(); ++s)
                    masks.push_back(sample_dropout_mask(L, H0, params.dropout_rate, rng));
            LossGradient lg;
            try {
                lg = loss_and_gradient(params, batch, use_dropout ? &masks : nullptr);
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::Numeric) throw;
                lg.loss = std::numeric_limits<double>::quiet_NaN();
            }
            if (!std::isfinite(lg.loss) || !lg.grad.allFinite())
                fail(ErrorKind::Training, "loss diverged at epoch " + std::to_string(epoch));
            const double gn = lg.grad.norm();
            if (cfg.clip_norm > 0.0 && gn > cfg.clip_norm) lg.grad *= cfg.clip_norm / gn;

            ++step;
            m = cfg.beta1 * m + (1.0 - cfg.beta1) * lg.grad;
            v = cfg.beta2 * v + (1.0 - cfg.beta2) * lg.grad.cwiseAbs2();
            const double bc1 = 1.0 - std::pow(cfg.beta1, double(step));
            const double bc2 = 1.0 - std::pow(cfg.beta2, double(step));
            theta.array() -= cfg.learning_rate * (m.array() / bc1) / ((v.array() / bc2).sqrt() + cfg.adam_eps);
            params.unpack(theta);
            epoch_loss += lg.loss * double(batch.size()) / double(n);
        }
        double val = std::numeric_limits<double>::quiet_NaN();
        try {
            val = mse(params, val_set);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::Numeric) throw;
        }
        if (!std::isfinite(val)) fail(ErrorKind::Training, "validation loss diverged at epoch " + std::to_string(epoch));
        trace.train_loss.push_back(epoch_loss);
        trace.val_loss.push_back(val);
        trace.epochs_run = epoch;
        if (val < best) {
            best = val;
            best_params = params;
            trace.best_epoch = epoch;
            wait = 0;
        } else if (++wait >= cfg.patience) {
            trace.early_stopped = true;
            break;
        }
    }
    trace.best_val_loss = best;
    res.params = std::move(best_params);
    log::debug("training stopped after ", trace.epochs_run, " epochs; best epoch ", trace.best_epoch,
               " val loss ", trace.best_val_loss);
    return res;
}

TrainResult train(const Architecture& arch, const WindowedDataset& train_set, const WindowedDataset& val_set,
                  const TrainConfig& cfg) {
    return train(init_network(arch, cfg.seed), train_set, val_set, cfg);
}

std::vector<GridResult> grid_search(const std::vector<Candidate>& candidates, const WindowedDataset& train_set,
                                    const WindowedDataset& val_set, const TrainConfig& base, double dropout_rate) {
    require(!candidates.empty(), ErrorKind::Domain, "grid search needs at least one candidate");
    std::vector<GridResult> out;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        const Candidate& cand = candidates[c];
        Architecture arch{train_set.n_features(), cand.hidden, train_set.n_features(), dropout_rate};
        TrainConfig cfg = base;
        cfg.learning_rate = cand.learning_rate;
        cfg.max_epochs = cand.max_epochs;
        cfg.patience = cand.patience;
        TrainResult r = train(arch, train_set, val_set, cfg);
        out.push_back({cand, c, r.trace.best_val_loss, std::move(r.trace)});
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const GridResult& a, const GridResult& b) { return a.val_mse < b.val_mse; });
    return out;
}

// ---- serialization ------------------------------------------------------------

io::json network_to_json(const NetworkParams& net) {
    net.validate();
    io::json j;
    j["format"] = "hlift.network";
    j["version"] = 1;
    j["dropout_rate"] = net.dropout_rate;
    j["input_size"] = net.input_size();
    j["output_size"] = net.output_size();
    io::json layers = io::json::array();
    for (const auto& l : net.layers)
        layers.push_back({{"input_size", l.input_size()},
                          {"hidden_size", l.hidden_size()},
                          {"Wx", io::matrix_to_json(l.Wx)},
                          {"Wh", io::matrix_to_json(l.Wh)},
                          {"b", io::vector_to_json(l.b)}});
    j["layers"] = std::move(layers);
    j["head"] = {{"W", io::matrix_to_json(net.head.W)}, {"b", io::vector_to_json(net.head.b)}};
    return j;
}

NetworkParams network_from_json(const io::json& j) {
    require(j.is_object() && j.value("format", "") == "hlift.network", ErrorKind::Parse, "not a network document");
    require(j.value("version", 0) == 1, ErrorKind::Parse, "unsupported network version");
    NetworkParams net;
    try {
        net.dropout_rate = j.at("dropout_rate").get<double>();
        Index in = j.at("input_size").get<Index>();
        const Index out = j.at("output_size").get<Index>();
        for (const auto& lj : j.at("layers")) {
            const Index li = lj.at("input_size").get<Index>();
            const Index H = lj.at("hidden_size").get<Index>();
            require(li == in && H >= 1, ErrorKind::Shape, "layer sizes do not chain");
            LstmLayer l;
            l.Wx = io::matrix_from_json(lj.at("Wx"), 4 * H, in);
            l.Wh = io::matrix_from_json(lj.at("Wh"), 4 * H, H);
            l.b = io::vector_from_json(lj.at("b"), 4 * H);
            net.layers.push_back(std::move(l));
            in = H;
        }
        net.head.W = io::matrix_from_json(j.at("head").at("W"), out, in);
        net.head.b = io::vector_from_json(j.at("head").at("b"), out);
    } catch (const io::json::exception& e) {
        fail(ErrorKind::Shape, std::string("network JSON: ") + e.what());
    }
    net.validate();
    return net;
}

} // namespace hlift
