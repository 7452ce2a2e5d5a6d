#pragma once

// Image and regularization losses. Reconstruction (L1 + SSIM), edge-aware
// smoothness, opacity sparsity, and the light-balance prior carry gradients;
// distortion and normal-depth consistency are diagnostic only (geometry is
// not trainable here) and are logged without gradients.

#include "radsurf/camera.hpp"
#include "radsurf/grad.hpp"
#include "radsurf/image.hpp"
#include "radsurf/tracer.hpp"

namespace radsurf {

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;
inline constexpr double kReconL1Weight = 0.8;
inline constexpr double kReconSsimWeight = 0.2;

// ---------------------------------------------------------------------------
// L1

inline double l1_loss(const Image& a, const Image& b) {
    if (!a.same_size(b)) throw std::invalid_argument("l1: image sizes differ");
    double acc = 0.0;
    for (size_t i = 0; i < a.pixels.size(); ++i) {
        Vec3 d = a.pixels[i] - b.pixels[i];
        acc += std::fabs(d.x) + std::fabs(d.y) + std::fabs(d.z);
    }
    return acc / (3.0 * static_cast<double>(a.pixels.size()));
}

inline void l1_backward(const Image& a, const Image& b, double d_loss, Image& d_a) {
    double w = d_loss / (3.0 * static_cast<double>(a.pixels.size()));
    for (size_t i = 0; i < a.pixels.size(); ++i) {
        Vec3 d = a.pixels[i] - b.pixels[i];
        d_a.pixels[i] += Vec3{d.x > 0 ? w : (d.x < 0 ? -w : 0.0),
                              d.y > 0 ? w : (d.y < 0 ? -w : 0.0),
                              d.z > 0 ? w : (d.z < 0 ? -w : 0.0)};
    }
}

// ---------------------------------------------------------------------------
// SSIM (Gaussian 11x11 window, valid region only)

namespace detail {

inline const std::array<double, kSsimWindow>& ssim_kernel() {
    static const std::array<double, kSsimWindow> k = [] {
        std::array<double, kSsimWindow> w{};
        double sum = 0.0;
        for (int i = 0; i < kSsimWindow; ++i) {
            double d = i - (kSsimWindow - 1) / 2.0;
            w[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
            sum += w[i];
        }
        for (double& v : w) v /= sum;
        return w;
    }();
    return k;
}

// Horizontal then vertical valid-region convolution of a scalar plane.
inline std::vector<double> conv_valid(const std::vector<double>& in, int w, int h, int& ow,
                                      int& oh) {
    const auto& k = ssim_kernel();
    ow = w - kSsimWindow + 1;
    oh = h - kSsimWindow + 1;
    std::vector<double> tmp(static_cast<size_t>(ow) * h, 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int i = 0; i < kSsimWindow; ++i) acc += k[i] * in[static_cast<size_t>(y) * w + x + i];
            tmp[static_cast<size_t>(y) * ow + x] = acc;
        }
    std::vector<double> out(static_cast<size_t>(ow) * oh, 0.0);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int i = 0; i < kSsimWindow; ++i)
                acc += k[i] * tmp[static_cast<size_t>(y + i) * ow + x];
            out[static_cast<size_t>(y) * ow + x] = acc;
        }
    return out;
}

// Adjoint of conv_valid: scatters window-space values back to pixel space.
inline void conv_valid_scatter(const std::vector<double>& win, int ow, int oh,
                               std::vector<double>& out, int w, int h) {
    const auto& k = ssim_kernel();
    std::vector<double> tmp(static_cast<size_t>(ow) * h, 0.0);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double v = win[static_cast<size_t>(y) * ow + x];
            if (v == 0.0) continue;
            for (int i = 0; i < kSsimWindow; ++i)
                tmp[static_cast<size_t>(y + i) * ow + x] += k[i] * v;
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < ow; ++x) {
            double v = tmp[static_cast<size_t>(y) * ow + x];
            if (v == 0.0) continue;
            for (int i = 0; i < kSsimWindow; ++i) out[static_cast<size_t>(y) * w + x + i] += k[i] * v;
        }
}

inline std::vector<double> channel_plane(const Image& img, int ch) {
    std::vector<double> p(img.pixels.size());
    for (size_t i = 0; i < p.size(); ++i) p[i] = img.pixels[i][ch];
    return p;
}

}  // namespace detail

// Mean SSIM over the valid window region and all channels. Optionally
// accumulates d(mean SSIM)/d(a) into d_a (scaled by d_loss).
inline double ssim(const Image& a, const Image& b, double d_loss = 0.0, Image* d_a = nullptr) {
    if (!a.same_size(b)) throw std::invalid_argument("ssim: image sizes differ");
    if (a.width < kSsimWindow || a.height < kSsimWindow)
        throw std::invalid_argument("ssim: image smaller than the filter window");
    int w = a.width, h = a.height;
    double total = 0.0;
    int ow = 0, oh = 0;
    for (int ch = 0; ch < 3; ++ch) {
        std::vector<double> x = detail::channel_plane(a, ch);
        std::vector<double> y = detail::channel_plane(b, ch);
        size_t n = x.size();
        std::vector<double> xx(n), yy(n), xy(n);
        for (size_t i = 0; i < n; ++i) {
            xx[i] = x[i] * x[i];
            yy[i] = y[i] * y[i];
            xy[i] = x[i] * y[i];
        }
        std::vector<double> mx = detail::conv_valid(x, w, h, ow, oh);
        std::vector<double> my = detail::conv_valid(y, w, h, ow, oh);
        std::vector<double> mxx = detail::conv_valid(xx, w, h, ow, oh);
        std::vector<double> myy = detail::conv_valid(yy, w, h, ow, oh);
        std::vector<double> mxy = detail::conv_valid(xy, w, h, ow, oh);
        size_t nw = mx.size();
        std::vector<double> c0, c2, c3;
        if (d_a) {
            c0.assign(nw, 0.0);
            c2.assign(nw, 0.0);
            c3.assign(nw, 0.0);
        }
        double acc = 0.0;
        for (size_t i = 0; i < nw; ++i) {
            double sx = mxx[i] - mx[i] * mx[i];
            double sy = myy[i] - my[i] * my[i];
            double sxy = mxy[i] - mx[i] * my[i];
            double a1 = 2.0 * mx[i] * my[i] + kSsimC1;
            double a2 = 2.0 * sxy + kSsimC2;
            double b1 = mx[i] * mx[i] + my[i] * my[i] + kSsimC1;
            double b2 = sx + sy + kSsimC2;
            acc += (a1 * a2) / (b1 * b2);
            if (d_a) {
                double ds_dmu = 2.0 * a2 * (my[i] * b1 - mx[i] * a1) / (b1 * b1 * b2);
                double ds_dsx = -a1 * a2 / (b1 * b2 * b2);
                double ds_dsxy = 2.0 * a1 / (b1 * b2);
                // dS/dx_q = sum_p w_qp [k0 + k2 x_q + k3 y_q] with
                // k2 = 2 ds_dsx, k3 = ds_dsxy,
                // k0 = ds_dmu - 2 ds_dsx mu_x - ds_dsxy mu_y.
                c2[i] = 2.0 * ds_dsx;
                c3[i] = ds_dsxy;
                c0[i] = ds_dmu - 2.0 * ds_dsx * mx[i] - ds_dsxy * my[i];
            }
        }
        total += acc / static_cast<double>(nw);
        if (d_a) {
            double scale = d_loss / (3.0 * static_cast<double>(nw));
            for (size_t i = 0; i < nw; ++i) {
                c0[i] *= scale;
                c2[i] *= scale;
                c3[i] *= scale;
            }
            std::vector<double> g(n, 0.0), gx(n, 0.0), gy(n, 0.0);
            detail::conv_valid_scatter(c0, ow, oh, g, w, h);
            detail::conv_valid_scatter(c2, ow, oh, gx, w, h);
            detail::conv_valid_scatter(c3, ow, oh, gy, w, h);
            for (size_t i = 0; i < n; ++i)
                d_a->pixels[i][ch] += g[i] + gx[i] * x[i] + gy[i] * y[i];
        }
    }
    return total / 3.0;
}

// ---------------------------------------------------------------------------
// Reconstruction: 0.8 * L1 + 0.2 * (1 - SSIM)

struct ReconLoss {
    double value = 0.0;
    double l1 = 0.0;
    double ssim = 0.0;
};

inline ReconLoss recon_loss(const Image& a, const Image& ref, double d_loss = 0.0,
                            Image* d_a = nullptr) {
    ReconLoss out;
    out.l1 = l1_loss(a, ref);
    if (d_a) l1_backward(a, ref, d_loss * kReconL1Weight, *d_a);
    out.ssim = ssim(a, ref, -d_loss * kReconSsimWeight, d_a);
    out.value = kReconL1Weight * out.l1 + kReconSsimWeight * (1.0 - out.ssim);
    return out;
}

// ---------------------------------------------------------------------------
// Distortion (diagnostic): per-ray spread of blend weights along depth,
// sum_{i != j} w_i w_j |z_i - z_j|, averaged over pixels.

inline double distortion_loss(const std::vector<std::vector<TraceRecord>>& records) {
    if (records.empty()) return 0.0;
    double total = 0.0;
    for (const auto& recs : records) {
        // Records arrive sorted by depth, so prefix sums give the pair sum.
        double w_prefix = 0.0, wz_prefix = 0.0, acc = 0.0;
        for (const TraceRecord& r : recs) {
            acc += r.weight * (r.t * w_prefix - wz_prefix);
            w_prefix += r.weight;
            wz_prefix += r.weight * r.t;
        }
        total += 2.0 * acc;  // count both orderings
    }
    return total / static_cast<double>(records.size());
}

// ---------------------------------------------------------------------------
// Normal-depth consistency (diagnostic): blended surfel normals against the
// normal of the depth-unprojected surface, oriented toward the camera.

inline double normal_depth_loss(const Scene& scene, const Camera& camera,
                                const Image& depth,
                                const std::vector<std::vector<TraceRecord>>& records) {
    int w = camera.width, h = camera.height;
    auto point = [&](int x, int y) {
        double d = depth.at(x, y).x;
        Ray r = camera.primary_ray(x, y);
        return r.origin + d * r.dir;
    };
    double total = 0.0;
    size_t valid = 0;
    for (int y = 0; y + 1 < h; ++y) {
        for (int x = 0; x + 1 < w; ++x) {
            if (depth.at(x, y).x <= 0 || depth.at(x + 1, y).x <= 0 || depth.at(x, y + 1).x <= 0)
                continue;
            Vec3 p = point(x, y);
            Vec3 nd = cross(point(x + 1, y) - p, point(x, y + 1) - p);
            double len = norm(nd);
            if (len <= 0.0) continue;
            nd /= len;
            if (dot(nd, camera.pos - p) < 0.0) nd = -nd;
            double acc = 0.0;
            for (const TraceRecord& r : records[static_cast<size_t>(y) * w + x])
                acc += r.weight * (1.0 - dot(scene.surfels[r.surfel].normal(), nd));
            total += acc;
            ++valid;
        }
    }
    return valid ? total / static_cast<double>(valid) : 0.0;
}

// ---------------------------------------------------------------------------
// Edge-aware smoothness: forward differences of a feature map, down-weighted
// across reference-image edges. mean over (pixel, direction) terms of
// mean_ch |grad F| * exp(-mean_ch |grad ref|).

inline double edge_aware_smoothness(const Image& feat, const Image& ref, double d_loss = 0.0,
                                    Image* d_feat = nullptr) {
    if (!feat.same_size(ref)) throw std::invalid_argument("smoothness: image sizes differ");
    int w = feat.width, h = feat.height;
    size_t terms = 0;
    double total = 0.0;
    auto handle = [&](int x, int y, int dx, int dy) {
        Vec3 df = feat.at(x + dx, y + dy) - feat.at(x, y);
        Vec3 dr = ref.at(x + dx, y + dy) - ref.at(x, y);
        double edge = std::exp(-mean_component(cwise_abs(dr)));
        total += mean_component(cwise_abs(df)) * edge;
        ++terms;
    };
    for (int y = 0; y < h; ++y)
        for (int x = 0; x + 1 < w; ++x) handle(x, y, 1, 0);
    for (int y = 0; y + 1 < h; ++y)
        for (int x = 0; x < w; ++x) handle(x, y, 0, 1);
    if (terms == 0) return 0.0;
    double loss = total / static_cast<double>(terms);
    if (d_feat) {
        double scale = d_loss / (3.0 * static_cast<double>(terms));
        auto backward = [&](int x, int y, int dx, int dy) {
            Vec3 df = feat.at(x + dx, y + dy) - feat.at(x, y);
            Vec3 dr = ref.at(x + dx, y + dy) - ref.at(x, y);
            double edge = std::exp(-mean_component(cwise_abs(dr)));
            Vec3 g{df.x > 0 ? 1.0 : (df.x < 0 ? -1.0 : 0.0),
                   df.y > 0 ? 1.0 : (df.y < 0 ? -1.0 : 0.0),
                   df.z > 0 ? 1.0 : (df.z < 0 ? -1.0 : 0.0)};
            g *= scale * edge;
            d_feat->at(x + dx, y + dy) += g;
            d_feat->at(x, y) -= g;
        };
        for (int y = 0; y < h; ++y)
            for (int x = 0; x + 1 < w; ++x) backward(x, y, 1, 0);
        for (int y = 0; y + 1 < h; ++y)
            for (int x = 0; x < w; ++x) backward(x, y, 0, 1);
    }
    return loss;
}

// ---------------------------------------------------------------------------
// Opacity sparsity: mean of log(alpha) + log(1 - alpha); maximal at 0.5, so
// minimizing drives opacities toward 0 or 1.

inline double sparsity_loss(const Scene& scene, double d_loss = 0.0, GradientTape* tape = nullptr) {
    size_t n = scene.surfels.size();
    if (n == 0) return 0.0;
    double total = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double a = std::clamp(scene.surfels[i].opacity, 1e-4, 1.0 - 1e-4);
        total += std::log(a) + std::log(1.0 - a);
        if (tape)
            tape->accumulate(ParamClass::Opacity, i,
                             d_loss * (1.0 / a - 1.0 / (1.0 - a)) / static_cast<double>(n));
    }
    return total / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Light balance prior: per-channel means of a blended irradiance image should
// agree, (1/3) * sum_ch |mean_ch - mean|. Returns the loss and fills the
// adjoint image for the blend backward.

inline double light_prior_loss(const Image& irr_image, double d_loss = 0.0,
                               Image* d_image = nullptr) {
    size_t n = irr_image.pixels.size();
    if (n == 0) return 0.0;
    Vec3 mean;
    for (const Vec3& p : irr_image.pixels) mean += p;
    mean /= static_cast<double>(n);
    double m = mean_component(mean);
    double loss = (std::fabs(mean.x - m) + std::fabs(mean.y - m) + std::fabs(mean.z - m)) / 3.0;
    if (d_image) {
        Vec3 sign{mean.x > m ? 1.0 : (mean.x < m ? -1.0 : 0.0),
                  mean.y > m ? 1.0 : (mean.y < m ? -1.0 : 0.0),
                  mean.z > m ? 1.0 : (mean.z < m ? -1.0 : 0.0)};
        double sign_sum = sign.x + sign.y + sign.z;
        Vec3 d_mean = (1.0 / 3.0) * (sign - Vec3{sign_sum / 3.0, sign_sum / 3.0, sign_sum / 3.0});
        Vec3 per_pixel = (d_loss / static_cast<double>(n)) * d_mean;
        for (Vec3& p : d_image->pixels) p += per_pixel;
    }
    return loss;
}

}  // namespace radsurf
