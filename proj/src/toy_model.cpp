#include "depthpatch/toy_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "depthpatch/adam.hpp"
#include "depthpatch/errors.hpp"
#include "depthpatch/rng.hpp"

using json = nlohmann::json;

namespace depthpatch {

namespace {

inline int down2(int n) { return (n + 1) / 2; }

// out(co,oy,ox) = b[co] + sum w(co,ci,ky,kx) * in(ci, oy*s-1+ky, ox*s-1+kx),
// zero padding of one pixel.
void conv_forward(const Tensor& in, Tensor& out, const std::vector<double>& w,
                  const std::vector<double>& b, int in_c, int out_c, int stride) {
    const int oh = out.h, ow = out.w;
    for (int co = 0; co < out_c; ++co) {
        for (int oy = 0; oy < oh; ++oy) {
            double* orow = &out.at(co, oy, 0);
            for (int ox = 0; ox < ow; ++ox) orow[ox] = b[co];
            for (int ci = 0; ci < in_c; ++ci)
                for (int ky = 0; ky < 3; ++ky) {
                    const int iy = oy * stride - 1 + ky;
                    if (iy < 0 || iy >= in.h) continue;
                    const double* irow = &in.at(ci, iy, 0);
                    const double* wk = &w[((static_cast<size_t>(co) * in_c + ci) * 3 + ky) * 3];
                    for (int ox = 0; ox < ow; ++ox) {
                        const int ix0 = ox * stride - 1;
                        double acc = 0.0;
                        if (ix0 >= 0 && ix0 + 2 < in.w) {
                            acc = wk[0] * irow[ix0] + wk[1] * irow[ix0 + 1] + wk[2] * irow[ix0 + 2];
                        } else {
                            for (int kx = 0; kx < 3; ++kx) {
                                const int ix = ix0 + kx;
                                if (ix >= 0 && ix < in.w) acc += wk[kx] * irow[ix];
                            }
                        }
                        orow[ox] += acc;
                    }
                }
        }
    }
}

// Scatters g_out back to g_in; optionally accumulates weight/bias grads.
void conv_backward(const Tensor& in, const Tensor& g_out, Tensor& g_in,
                   const std::vector<double>& w, int in_c, int out_c, int stride,
                   double* g_w, double* g_b) {
    const int oh = g_out.h, ow = g_out.w;
    for (int co = 0; co < out_c; ++co) {
        for (int oy = 0; oy < oh; ++oy) {
            const double* grow = &g_out.at(co, oy, 0);
            if (g_b) {
                double acc = 0.0;
                for (int ox = 0; ox < ow; ++ox) acc += grow[ox];
                g_b[co] += acc;
            }
            for (int ci = 0; ci < in_c; ++ci)
                for (int ky = 0; ky < 3; ++ky) {
                    const int iy = oy * stride - 1 + ky;
                    if (iy < 0 || iy >= in.h) continue;
                    double* girow = &g_in.at(ci, iy, 0);
                    const double* irow = &in.at(ci, iy, 0);
                    const size_t wbase = ((static_cast<size_t>(co) * in_c + ci) * 3 + ky) * 3;
                    const double* wk = &w[wbase];
                    double* gwk = g_w ? g_w + wbase : nullptr;
                    for (int ox = 0; ox < ow; ++ox) {
                        const double g = grow[ox];
                        if (g == 0.0) continue;
                        const int ix0 = ox * stride - 1;
                        for (int kx = 0; kx < 3; ++kx) {
                            const int ix = ix0 + kx;
                            if (ix < 0 || ix >= in.w) continue;
                            girow[ix] += wk[kx] * g;
                            if (gwk) gwk[kx] += irow[ix] * g;
                        }
                    }
                }
        }
    }
}

void relu_inplace(Tensor& t) {
    for (double& x : t.v)
        if (x < 0.0) x = 0.0;
}

// Gate g by the sign of the pre-activation.
void relu_backward(const Tensor& pre, Tensor& g) {
    for (size_t i = 0; i < g.v.size(); ++i)
        if (pre.v[i] <= 0.0) g.v[i] = 0.0;
}

Tensor upsample2(const Tensor& in, int oh, int ow) {
    Tensor out(in.c, oh, ow);
    for (int c = 0; c < in.c; ++c)
        for (int y = 0; y < oh; ++y)
            for (int x = 0; x < ow; ++x) out.at(c, y, x) = in.at(c, y / 2, x / 2);
    return out;
}

void upsample2_backward(const Tensor& g_out, Tensor& g_in) {
    for (int c = 0; c < g_out.c; ++c)
        for (int y = 0; y < g_out.h; ++y)
            for (int x = 0; x < g_out.w; ++x)
                g_in.at(c, y / 2, x / 2) += g_out.at(c, y, x);
}

Tensor concat(const Tensor& a, const Tensor& b) {
    Tensor out(a.c + b.c, a.h, a.w);
    std::copy(a.v.begin(), a.v.end(), out.v.begin());
    std::copy(b.v.begin(), b.v.end(), out.v.begin() + a.v.size());
    return out;
}

}  // namespace

struct ToyDepthModel::Activations {
    Image input;
    std::vector<Tensor> enc_pre, enc_act;  // per encoder level
    std::vector<Tensor> dec_in, dec_pre, dec_act;
    Tensor head_pre;  // 1 x H x W, pre-sigmoid
    DisparityMap out;
};

ToyDepthModel::ToyDepthModel(const Options& opts, std::uint64_t seed)
    : opts_(opts), seed_(seed) {
    for (int c : opts_.channels)
        if (c < 1) throw ConfigError("toy model: channel counts must be positive");
    init_weights();
}

void ToyDepthModel::init_weights() {
    Rng rng(hash_combine(seed_, hash_str("toy-init")));
    auto make_conv = [&](int in_c, int out_c, int stride) {
        Conv c;
        c.in_c = in_c;
        c.out_c = out_c;
        c.stride = stride;
        c.w.resize(static_cast<size_t>(out_c) * in_c * 9);
        c.b.assign(out_c, 0.0);
        const double limit = std::sqrt(6.0 / (in_c * 9));
        for (double& x : c.w) x = rng.uniform(-limit, limit);
        return c;
    };

    const auto& ch = opts_.channels;
    enc_.clear();
    dec_.clear();
    enc_.push_back(make_conv(3, ch[0], 1));
    for (int i = 1; i < 5; ++i) enc_.push_back(make_conv(ch[i - 1], ch[i], 2));
    for (int i = 3; i >= 0; --i) dec_.push_back(make_conv(ch[i + 1] + ch[i], ch[i], 1));
    head_ = make_conv(ch[0], 1, 1);
}

void ToyDepthModel::forward(const Image& image, Activations& tape) const {
    if (image.c != 3) throw DataError("toy model: expected RGB image");
    tape.input = image;
    tape.enc_pre.clear();
    tape.enc_act.clear();
    tape.dec_in.clear();
    tape.dec_pre.clear();
    tape.dec_act.clear();

    const Tensor* cur = &tape.input;
    int h = image.h, w = image.w;
    for (size_t i = 0; i < enc_.size(); ++i) {
        const Conv& c = enc_[i];
        if (c.stride == 2) {
            h = down2(h);
            w = down2(w);
        }
        Tensor pre(c.out_c, h, w);
        conv_forward(*cur, pre, c.w, c.b, c.in_c, c.out_c, c.stride);
        tape.enc_pre.push_back(pre);
        relu_inplace(pre);
        tape.enc_act.push_back(std::move(pre));
        cur = &tape.enc_act.back();
    }

    // Decoder: dec_[j] merges the skip from encoder level 3-j.
    const Tensor* deep = &tape.enc_act.back();
    for (size_t j = 0; j < dec_.size(); ++j) {
        const Tensor& skip = tape.enc_act[3 - j];
        Tensor up = upsample2(*deep, skip.h, skip.w);
        tape.dec_in.push_back(concat(up, skip));
        const Conv& c = dec_[j];
        Tensor pre(c.out_c, skip.h, skip.w);
        conv_forward(tape.dec_in.back(), pre, c.w, c.b, c.in_c, c.out_c, 1);
        tape.dec_pre.push_back(pre);
        relu_inplace(pre);
        tape.dec_act.push_back(std::move(pre));
        deep = &tape.dec_act.back();
    }

    tape.head_pre = Tensor(1, image.h, image.w);
    conv_forward(*deep, tape.head_pre, head_.w, head_.b, head_.in_c, 1, 1);
    tape.out = DisparityMap(image.h, image.w);
    for (size_t i = 0; i < tape.out.v.size(); ++i)
        tape.out.v[i] = 1.0 / (1.0 + std::exp(-tape.head_pre.v[i]));
}

DisparityMap ToyDepthModel::predict(const Image& image) const {
    Activations tape;
    forward(image, tape);
    return tape.out;
}

Image ToyDepthModel::backward(const Activations& tape, const DisparityMap& upstream,
                              std::vector<double>* grads) const {
    // Parameter gradient layout mirrors pack_params.
    double* gp = nullptr;
    std::vector<size_t> offsets;
    if (grads) {
        grads->assign(param_count(), 0.0);
        gp = grads->data();
        size_t off = 0;
        auto push = [&](const Conv& c) {
            offsets.push_back(off);
            off += c.w.size() + c.b.size();
        };
        for (const auto& c : enc_) push(c);
        for (const auto& c : dec_) push(c);
        push(head_);
    }
    auto layer_gw = [&](size_t layer_idx, const Conv& c) -> std::pair<double*, double*> {
        if (!gp) return {nullptr, nullptr};
        double* base = gp + offsets[layer_idx];
        return {base, base + c.w.size()};
    };

    Tensor g_head_pre(1, tape.head_pre.h, tape.head_pre.w);
    for (size_t i = 0; i < g_head_pre.v.size(); ++i) {
        const double s = tape.out.v[i];
        g_head_pre.v[i] = upstream.v[i] * s * (1.0 - s);
    }

    const size_t head_idx = enc_.size() + dec_.size();
    Tensor g_cur(tape.dec_act.back().c, tape.dec_act.back().h, tape.dec_act.back().w);
    {
        auto [gw, gb] = layer_gw(head_idx, head_);
        conv_backward(tape.dec_act.back(), g_head_pre, g_cur, head_.w, head_.in_c, 1, 1, gw, gb);
    }

    // Decoder levels in reverse; g_cur holds the gradient at dec_act[j].
    std::vector<Tensor> g_enc_act(5);
    for (int j = static_cast<int>(dec_.size()) - 1; j >= 0; --j) {
        const Conv& c = dec_[j];
        relu_backward(tape.dec_pre[j], g_cur);
        Tensor g_in(c.in_c, tape.dec_in[j].h, tape.dec_in[j].w);
        auto [gw, gb] = layer_gw(enc_.size() + j, c);
        conv_backward(tape.dec_in[j], g_cur, g_in, c.w, c.in_c, c.out_c, 1, gw, gb);

        // Split the concat: first channels came from the upsampled deep path,
        // the rest from encoder level 3-j.
        const int skip_level = 3 - j;
        const Tensor& skip = tape.enc_act[skip_level];
        const int deep_c = c.in_c - skip.c;
        Tensor g_up(deep_c, g_in.h, g_in.w);
        std::copy(g_in.v.begin(), g_in.v.begin() + g_up.v.size(), g_up.v.begin());
        Tensor g_skip(skip.c, skip.h, skip.w);
        std::copy(g_in.v.begin() + g_up.v.size(), g_in.v.end(), g_skip.v.begin());

        if (g_enc_act[skip_level].v.empty())
            g_enc_act[skip_level] = std::move(g_skip);
        else
            for (size_t i = 0; i < g_skip.v.size(); ++i)
                g_enc_act[skip_level].v[i] += g_skip.v[i];

        const Tensor& deeper =
            (j == 0) ? tape.enc_act.back() : tape.dec_act[j - 1];
        Tensor g_deeper(deeper.c, deeper.h, deeper.w);
        upsample2_backward(g_up, g_deeper);
        if (j == 0) {
            if (g_enc_act[4].v.empty())
                g_enc_act[4] = std::move(g_deeper);
            else
                for (size_t i = 0; i < g_deeper.v.size(); ++i)
                    g_enc_act[4].v[i] += g_deeper.v[i];
        } else {
            g_cur = std::move(g_deeper);
        }
    }

    // Encoder levels in reverse, folding in the skip gradients.
    Tensor g_input(3, tape.input.h, tape.input.w);
    Tensor g_level = std::move(g_enc_act[4]);
    for (int i = 4; i >= 0; --i) {
        const Conv& c = enc_[i];
        if (i < 4 && !g_enc_act[i].v.empty())
            for (size_t k = 0; k < g_level.v.size(); ++k) g_level.v[k] += g_enc_act[i].v[k];
        relu_backward(tape.enc_pre[i], g_level);
        const Tensor& in = (i == 0) ? tape.input : tape.enc_act[i - 1];
        Tensor g_in(c.in_c, in.h, in.w);
        auto [gw, gb] = layer_gw(i, c);
        conv_backward(in, g_level, g_in, c.w, c.in_c, c.out_c, c.stride, gw, gb);
        if (i == 0)
            g_input = std::move(g_in);
        else
            g_level = std::move(g_in);
    }
    return g_input;
}

Image ToyDepthModel::gradient_wrt_image(const Image& image,
                                        const DisparityMap& upstream) const {
    if (upstream.h != image.h || upstream.w != image.w)
        throw DataError("toy model: upstream shape mismatch");
    Activations tape;
    forward(image, tape);
    return backward(tape, upstream, nullptr);
}

class ToyForwardTape final : public DepthModel::Tape {
public:
    ToyForwardTape(const ToyDepthModel& model, const Image& image) : model_(model) {
        model_.forward(image, acts_);
    }
    const DisparityMap& output() const override { return acts_.out; }
    Image backward(const DisparityMap& upstream) const override {
        return model_.backward(acts_, upstream, nullptr);
    }

private:
    const ToyDepthModel& model_;
    ToyDepthModel::Activations acts_;
};

std::unique_ptr<DepthModel::Tape> ToyDepthModel::forward_with_tape(const Image& image) const {
    return std::make_unique<ToyForwardTape>(*this, image);
}

std::uint64_t ToyDepthModel::weights_checksum() const {
    std::vector<double> params;
    pack_params(params);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (double x : params) {
        std::uint64_t bits;
        std::memcpy(&bits, &x, sizeof(bits));
        for (int i = 0; i < 8; ++i) {
            h ^= (bits >> (8 * i)) & 0xff;
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

size_t ToyDepthModel::param_count() const {
    size_t n = 0;
    for (const auto& c : enc_) n += c.w.size() + c.b.size();
    for (const auto& c : dec_) n += c.w.size() + c.b.size();
    n += head_.w.size() + head_.b.size();
    return n;
}

void ToyDepthModel::pack_params(std::vector<double>& out) const {
    out.clear();
    out.reserve(param_count());
    auto pack = [&](const Conv& c) {
        out.insert(out.end(), c.w.begin(), c.w.end());
        out.insert(out.end(), c.b.begin(), c.b.end());
    };
    for (const auto& c : enc_) pack(c);
    for (const auto& c : dec_) pack(c);
    pack(head_);
}

void ToyDepthModel::unpack_params(const std::vector<double>& in) {
    size_t off = 0;
    auto unpack = [&](Conv& c) {
        std::copy(in.begin() + off, in.begin() + off + c.w.size(), c.w.begin());
        off += c.w.size();
        std::copy(in.begin() + off, in.begin() + off + c.b.size(), c.b.begin());
        off += c.b.size();
    };
    for (auto& c : enc_) unpack(c);
    for (auto& c : dec_) unpack(c);
    unpack(head_);
    if (off != in.size()) throw DataError("toy model: parameter count mismatch");
}

void ToyDepthModel::augment_input(Image& input, std::uint64_t seed) const {
    Rng rng(seed);
    if (opts_.augment_pixel_noise > 0.0 && rng.next_double() < 0.5)
        for (double& x : input.v)
            x = std::clamp(x + rng.uniform(-opts_.augment_pixel_noise,
                                           opts_.augment_pixel_noise),
                           0.0, 1.0);
    const int squares = rng.uniform_int(0, opts_.augment_max_squares);
    for (int s = 0; s < squares; ++s) {
        const int side = rng.uniform_int(3, 9);
        const int x0 = rng.uniform_int(0, input.w - side);
        const int y0 = rng.uniform_int(0, input.h - side);
        for (int y = y0; y < y0 + side; ++y)
            for (int x = x0; x < x0 + side; ++x)
                for (int ch = 0; ch < 3; ++ch) input.at(ch, y, x) = rng.next_double();
    }
}

ToyDepthModel::PretrainReport ToyDepthModel::pretrain(const DatasetSplit& split,
                                                      int epochs, std::uint64_t seed) {
    if (split.train.empty()) throw DataError("pretrain: empty training split");
    for (const auto& s : split.train)
        if (!s.gt_disparity) throw DataError("pretrain: scene " + s.id + " has no ground truth");

    std::vector<double> params;
    pack_params(params);
    Adam adam(opts_.learning_rate);
    adam.init(params.size());

    PretrainReport report;
    report.epochs = epochs;

    std::vector<size_t> order(split.train.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> batch_grad(params.size(), 0.0);
    std::vector<double> item_grad;

    for (int epoch = 0; epoch < epochs; ++epoch) {
        Rng shuffle_rng(hash_combine(seed, hash_str("pretrain-order"),
                                     static_cast<std::uint64_t>(epoch)));
        for (size_t i = order.size() - 1; i > 0; --i)
            std::swap(order[i], order[shuffle_rng.uniform_int(0, static_cast<int>(i))]);

        double epoch_loss = 0.0;
        size_t done = 0;
        while (done < order.size()) {
            const size_t bsz =
                std::min<size_t>(opts_.batch_size, order.size() - done);
            std::fill(batch_grad.begin(), batch_grad.end(), 0.0);
            for (size_t bi = 0; bi < bsz; ++bi) {
                const SceneSample& sample = split.train[order[done + bi]];
                Image input = sample.image;
                if (opts_.augment)
                    augment_input(input, hash_combine(seed, hash_str("augment"),
                                                      static_cast<std::uint64_t>(epoch),
                                                      order[done + bi]));
                Activations tape;
                forward(input, tape);
                const DisparityMap& gt = *sample.gt_disparity;
                const double inv_n = 1.0 / static_cast<double>(tape.out.size());
                DisparityMap upstream(tape.out.h, tape.out.w);
                double loss = 0.0;
                for (size_t k = 0; k < tape.out.v.size(); ++k) {
                    const double diff = tape.out.v[k] - gt.v[k];
                    loss += std::abs(diff) * inv_n;
                    upstream.v[k] = (diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0)) * inv_n;
                }
                epoch_loss += loss;
                backward(tape, upstream, &item_grad);
                for (size_t k = 0; k < batch_grad.size(); ++k)
                    batch_grad[k] += item_grad[k] / static_cast<double>(bsz);
            }
            adam.step(params, batch_grad);
            unpack_params(params);
            done += bsz;
        }
        report.train_loss_per_epoch.push_back(epoch_loss / static_cast<double>(order.size()));
    }

    report.held_out_mae = split.test.empty() ? 0.0 : mean_abs_error(split.test);
    if (report.held_out_mae > 0.15)
        throw NumericError(
            "toy model failed to converge (held-out MAE " +
            std::to_string(report.held_out_mae) +
            " > 0.15); try a different seed or more epochs");
    return report;
}

double ToyDepthModel::mean_abs_error(const std::vector<SceneSample>& scenes) const {
    if (scenes.empty()) throw DataError("mean_abs_error: no scenes");
    double total = 0.0;
    size_t count = 0;
    for (const auto& s : scenes) {
        if (!s.gt_disparity) throw DataError("mean_abs_error: scene " + s.id + " has no ground truth");
        const DisparityMap pred = predict(s.image);
        for (size_t k = 0; k < pred.v.size(); ++k) total += std::abs(pred.v[k] - s.gt_disparity->v[k]);
        count += pred.v.size();
    }
    return total / static_cast<double>(count);
}

void ToyDepthModel::save(const std::string& path) const {
    json header;
    header["format"] = "depthpatch-model";
    header["version"] = 1;
    header["kind"] = "toy";
    header["channels"] = opts_.channels;
    header["learning_rate"] = opts_.learning_rate;
    header["batch_size"] = opts_.batch_size;
    header["augment"] = opts_.augment;
    header["augment_pixel_noise"] = opts_.augment_pixel_noise;
    header["augment_max_squares"] = opts_.augment_max_squares;
    header["seed"] = seed_;
    std::vector<double> params;
    pack_params(params);
    header["param_count"] = params.size();

    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("toy model save: cannot open " + path);
    const std::string hs = header.dump();
    const std::uint32_t hlen = static_cast<std::uint32_t>(hs.size());
    f.write("DPMODEL\0", 8);
    f.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    f.write(hs.data(), hs.size());
    f.write(reinterpret_cast<const char*>(params.data()),
            static_cast<std::streamsize>(params.size() * sizeof(double)));
    if (!f) throw DataError("toy model save: short write to " + path);
}

ToyDepthModel ToyDepthModel::load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("toy model load: cannot open " + path);
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, "DPMODEL\0", 8) != 0)
        throw DataError("toy model load: bad magic in " + path);
    std::uint32_t hlen = 0;
    f.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    if (!f || hlen == 0 || hlen > (1u << 20))
        throw DataError("toy model load: bad header length in " + path);
    std::string hs(hlen, '\0');
    f.read(hs.data(), hlen);
    json header;
    try {
        header = json::parse(hs);
    } catch (const json::exception& e) {
        throw DataError(std::string("toy model load: bad header JSON: ") + e.what());
    }
    if (header.value("version", 0) != 1 || header.value("kind", "") != "toy")
        throw DataError("toy model load: unsupported container version/kind in " + path);

    Options opts;
    const auto ch = header["channels"].get<std::vector<int>>();
    if (ch.size() != opts.channels.size())
        throw DataError("toy model load: bad channel spec in " + path);
    std::copy(ch.begin(), ch.end(), opts.channels.begin());
    opts.learning_rate = header.value("learning_rate", 1e-3);
    opts.batch_size = header.value("batch_size", 4);
    opts.augment = header.value("augment", true);
    opts.augment_pixel_noise = header.value("augment_pixel_noise", 0.03);
    opts.augment_max_squares = header.value("augment_max_squares", 1);

    ToyDepthModel model(opts, header.value("seed", 0ULL));
    std::vector<double> params(header["param_count"].get<size_t>());
    if (params.size() != model.param_count())
        throw DataError("toy model load: parameter count mismatch in " + path);
    f.read(reinterpret_cast<char*>(params.data()),
           static_cast<std::streamsize>(params.size() * sizeof(double)));
    if (!f) throw DataError("toy model load: truncated parameters in " + path);
    model.unpack_params(params);
    return model;
}

}  // namespace depthpatch
