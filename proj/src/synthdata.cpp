#include "simsc/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "json.hpp"
#include "simsc/serialize.hpp"

namespace simsc {
namespace {

using nlohmann::json;

// Smooth procedural texture: a base level plus random Gaussian blobs over
// three octaves. Defined on the whole plane, so warped lookups never need
// boundary handling.
struct Texture {
    struct Blob {
        double row, col, amp, inv_two_sigma_sq;
    };
    std::vector<Blob> blobs;

    double value(double row, double col) const {
        double v = 0.5;
        for (const auto& b : blobs) {
            const double dr = row - b.row;
            const double dc = col - b.col;
            v += b.amp * std::exp(-(dr * dr + dc * dc) * b.inv_two_sigma_sq);
        }
        return std::clamp(v, 0.0, 1.0);
    }
};

Texture random_texture(Rng& rng, double size) {
    const double sigmas[3] = {size / 5.0, size / 10.0, size / 20.0};
    const std::size_t counts[3] = {6, 12, 24};
    const double amps[3] = {0.28, 0.20, 0.14};
    Texture tex;
    for (int oct = 0; oct < 3; ++oct) {
        for (std::size_t i = 0; i < counts[oct]; ++i) {
            Texture::Blob b;
            b.row = rng.uniform(-0.15 * size, 1.15 * size);
            b.col = rng.uniform(-0.15 * size, 1.15 * size);
            double a = rng.uniform(0.4 * amps[oct], amps[oct]);
            if (rng.uniform() < 0.5) a = -a;
            b.amp = a;
            const double s = sigmas[oct] * rng.uniform(0.8, 1.2);
            b.inv_two_sigma_sq = 1.0 / (2.0 * s * s);
            tex.blobs.push_back(b);
        }
    }
    return tex;
}

struct Photometric {
    double contrast = 1.0, brightness = 0.0;
    double apply(double v) const {
        return std::clamp(0.5 + contrast * (v - 0.5) + brightness, 0.0, 1.0);
    }
};

Photometric random_photometric(Rng& rng, const SynthConfig& cfg) {
    Photometric p;
    if (cfg.photometric) {
        p.contrast = rng.uniform(1.0 - cfg.contrast_jitter, 1.0 + cfg.contrast_jitter);
        p.brightness = rng.uniform(-cfg.brightness_jitter, cfg.brightness_jitter);
    }
    return p;
}

// Lipschitz constant of the RBF displacement field (max gradient of a
// Gaussian bump of amplitude |a| and width sigma is |a| e^{-1/2} / sigma).
double rbf_lipschitz(const Warp& w) {
    double l = 0.0;
    for (const auto& k : w.controls) {
        const double mag = std::hypot(k.amp_row, k.amp_col);
        l += mag * std::exp(-0.5) / k.sigma;
    }
    return l;
}

double max_grid_displacement(const Warp& w, double size) {
    double worst = 0.0;
    for (int i = 0; i < 5; ++i) {
        for (int j = 0; j < 5; ++j) {
            const Point y{(size - 1.0) * i / 4.0, (size - 1.0) * j / 4.0};
            const Point x = w.to_source(y);
            worst = std::max(worst, std::hypot(x.row - y.row, x.col - y.col));
        }
    }
    return worst;
}

Warp random_warp(Rng& rng, const std::string& kind, const SynthConfig& cfg) {
    const double size = static_cast<double>(cfg.size);
    for (int attempt = 0; attempt < 100; ++attempt) {
        Warp w;
        w.kind = kind;
        w.center_row = (size - 1.0) / 2.0;
        w.center_col = (size - 1.0) / 2.0;
        const double rot = rng.uniform(-cfg.max_rotation, cfg.max_rotation);
        const double s0 = std::exp(rng.uniform(-cfg.max_log_scale, cfg.max_log_scale));
        const double s1 = std::exp(rng.uniform(-cfg.max_log_scale, cfg.max_log_scale));
        const double cr = std::cos(rot), sr = std::sin(rot);
        w.a00 = cr * s0;
        w.a01 = -sr * s1;
        w.a10 = sr * s0;
        w.a11 = cr * s1;
        w.t_row = rng.uniform(-cfg.max_translation, cfg.max_translation);
        w.t_col = rng.uniform(-cfg.max_translation, cfg.max_translation);
        if (kind == "thin_perturbation") {
            for (std::size_t j = 0; j < cfg.rbf_controls; ++j) {
                Warp::Control k;
                k.row = rng.uniform(0.15 * size, 0.85 * size);
                k.col = rng.uniform(0.15 * size, 0.85 * size);
                const double ang = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
                const double mag = rng.uniform(0.3, 1.0) * cfg.rbf_amplitude;
                k.amp_row = mag * std::cos(ang);
                k.amp_col = mag * std::sin(ang);
                k.sigma = cfg.rbf_sigma * rng.uniform(0.8, 1.2);
                w.controls.push_back(k);
            }
        }
        // Invertibility: the fixed-point inverse contracts when
        // |A^-1| * Lip(RBF) < 1; singular values of A are exactly s0, s1.
        const double inv_norm = 1.0 / std::min(s0, s1);
        if (inv_norm * rbf_lipschitz(w) > 0.5) continue;
        if (max_grid_displacement(w, size) > cfg.max_displacement_fraction * size) continue;
        return w;
    }
    throw std::runtime_error("synthdata: failed to draw an admissible warp in 100 attempts");
}

void validate_config(const SynthConfig& cfg) {
    if (cfg.size < 2 || cfg.channels == 0 || cfg.ratio == 0)
        throw std::invalid_argument("synthdata: size, channels, ratio must be positive");
    if (cfg.size % cfg.ratio != 0)
        throw std::invalid_argument("synthdata: size must be divisible by ratio");
    if (cfg.min_keypoints < 1 || cfg.max_keypoints < cfg.min_keypoints)
        throw std::invalid_argument("synthdata: need 1 <= min_keypoints <= max_keypoints");
    if (cfg.max_rotation < 0 || cfg.max_log_scale < 0 || cfg.max_translation < 0 ||
        cfg.rbf_amplitude < 0 || cfg.rbf_sigma <= 0)
        throw std::invalid_argument("synthdata: warp ranges must be non-negative, rbf_sigma > 0");
    if (cfg.max_displacement_fraction <= 0 || cfg.brightness_jitter < 0 ||
        cfg.contrast_jitter < 0 || cfg.contrast_jitter >= 1.0)
        throw std::invalid_argument("synthdata: bad jitter/displacement ranges");
}

json config_to_json(const SynthConfig& c) {
    return json{{"size", c.size},
                {"channels", c.channels},
                {"ratio", c.ratio},
                {"min_keypoints", c.min_keypoints},
                {"max_keypoints", c.max_keypoints},
                {"photometric", c.photometric}};
}

}  // namespace

Point Warp::to_source(Point in_b) const {
    // Written as point + offset so a warp with identity parameters maps every
    // point to itself exactly (the offset is exactly zero).
    const double dr = in_b.row - center_row;
    const double dc = in_b.col - center_col;
    double r = in_b.row + ((a00 - 1.0) * dr + a01 * dc + t_row);
    double c = in_b.col + (a10 * dr + (a11 - 1.0) * dc + t_col);
    for (const auto& k : controls) {
        const double qr = in_b.row - k.row;
        const double qc = in_b.col - k.col;
        const double w = std::exp(-(qr * qr + qc * qc) / (2.0 * k.sigma * k.sigma));
        r += k.amp_row * w;
        c += k.amp_col * w;
    }
    return {r, c};
}

Point Warp::to_target(Point in_a) const {
    const double det = a00 * a11 - a01 * a10;
    if (std::abs(det) < 1e-12)
        throw std::runtime_error("warp inversion: singular linear part");
    const double i00 = a11 / det, i01 = -a01 / det;
    const double i10 = -a10 / det, i11 = a00 / det;
    {
        const Point self = to_source(in_a);
        if (self.row == in_a.row && self.col == in_a.col) return in_a;
    }
    Point q = in_a;
    for (int iter = 0; iter < 200; ++iter) {
        double rbf_r = 0.0, rbf_c = 0.0;
        for (const auto& k : controls) {
            const double qr = q.row - k.row;
            const double qc = q.col - k.col;
            const double w = std::exp(-(qr * qr + qc * qc) / (2.0 * k.sigma * k.sigma));
            rbf_r += k.amp_row * w;
            rbf_c += k.amp_col * w;
        }
        const double rr = in_a.row - rbf_r - t_row - center_row;
        const double rc = in_a.col - rbf_c - t_col - center_col;
        const Point next{center_row + i00 * rr + i01 * rc, center_col + i10 * rr + i11 * rc};
        const double delta = std::abs(next.row - q.row) + std::abs(next.col - q.col);
        q = next;
        if (delta < 1e-13) break;
    }
    const Point back = to_source(q);
    if (std::abs(back.row - in_a.row) + std::abs(back.col - in_a.col) > 1e-10)
        throw std::runtime_error("warp inversion failed to converge");
    return q;
}

SynthPair generate_pair(std::uint64_t seed, const SynthConfig& config) {
    validate_config(config);
    const double size = static_cast<double>(config.size);
    Rng root(seed);
    Rng tex_rng = root.fork(1);
    Rng warp_rng = root.fork(2);
    Rng kp_rng = root.fork(3);
    Rng photo_rng = root.fork(4);

    std::vector<Texture> textures;
    for (std::size_t ch = 0; ch < config.channels; ++ch)
        textures.push_back(random_texture(tex_rng, size));

    const std::string kind = (seed % 2 == 0) ? "affine" : "thin_perturbation";
    SynthPair out;
    out.seed = seed;
    out.warp = random_warp(warp_rng, kind, config);

    const Photometric photo_a = random_photometric(photo_rng, config);
    const Photometric photo_b = random_photometric(photo_rng, config);

    const std::size_t n = config.size;
    std::vector<double> buf_a(config.channels * n * n), buf_b(config.channels * n * n);
    for (std::size_t ch = 0; ch < config.channels; ++ch) {
        double* pa = buf_a.data() + ch * n * n;
        double* pb = buf_b.data() + ch * n * n;
        for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t c = 0; c < n; ++c) {
                const double y_r = static_cast<double>(r);
                const double y_c = static_cast<double>(c);
                pa[r * n + c] = photo_a.apply(textures[ch].value(y_r, y_c));
                const Point src = out.warp.to_source({y_r, y_c});
                pb[r * n + c] = photo_b.apply(textures[ch].value(src.row, src.col));
            }
        }
    }
    const Shape img_shape{config.channels, n, n};
    out.image_a = Image{config.channels, n, n, Tensor::from_data(img_shape, std::move(buf_a))};
    out.image_b = Image{config.channels, n, n, Tensor::from_data(img_shape, std::move(buf_b))};

    // Keypoints: margin keeps queries and targets inside the feature grid's
    // valid region; spread (two feature cells) keeps GT windows apart in both
    // images. Retries resample the interior points under the same warp.
    const double margin = 4.0;
    const double lo = margin, hi = size - 1.0 - margin;
    const double spread = 2.0 * static_cast<double>(config.ratio);
    const std::size_t count = kp_rng.uniform_int(config.min_keypoints, config.max_keypoints);
    bool done = false;
    for (int attempt = 0; attempt < 100 && !done; ++attempt) {
        out.keypoints_a.clear();
        out.keypoints_b.clear();
        bool ok = true;
        for (std::size_t i = 0; i < count && ok; ++i) {
            bool placed = false;
            for (int trial = 0; trial < 40 && !placed; ++trial) {
                const Point p{kp_rng.uniform(lo, hi), kp_rng.uniform(lo, hi)};
                const Point q = out.warp.to_target(p);
                if (q.row < lo || q.row > hi || q.col < lo || q.col > hi) continue;
                bool clear = true;
                for (std::size_t j = 0; j < out.keypoints_a.size() && clear; ++j) {
                    if (std::hypot(p.row - out.keypoints_a[j].row,
                                   p.col - out.keypoints_a[j].col) < spread ||
                        std::hypot(q.row - out.keypoints_b[j].row,
                                   q.col - out.keypoints_b[j].col) < spread)
                        clear = false;
                }
                if (!clear) continue;
                out.keypoints_a.push_back(p);
                out.keypoints_b.push_back(q);
                placed = true;
            }
            if (!placed) ok = false;
        }
        done = ok;
    }
    if (!done)
        throw std::runtime_error("synthdata: keypoint sampling failed after 100 attempts");

    double min_r = std::numeric_limits<double>::infinity(), max_r = -min_r;
    double min_c = min_r, max_c = max_r;
    for (const auto& q : out.keypoints_b) {
        min_r = std::min(min_r, q.row);
        max_r = std::max(max_r, q.row);
        min_c = std::min(min_c, q.col);
        max_c = std::max(max_c, q.col);
    }
    out.bbox_b = {max_r - min_r, max_c - min_c};
    return out;
}

void generate_split(std::uint64_t seed, std::size_t n_train, std::size_t n_val,
                    std::size_t n_test, const SynthConfig& config, const std::string& out_dir) {
    validate_config(config);
    constexpr std::uint64_t kSplitStride = 1ULL << 20;
    if (n_train < 1 || n_val < 1 || n_test < 1)
        throw std::invalid_argument("generate_split: split sizes must be at least 1");
    if (n_train >= kSplitStride || n_val >= kSplitStride || n_test >= kSplitStride)
        throw std::invalid_argument("generate_split: split sizes exceed seed stride");
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(out_dir) / "images");

    const struct {
        const char* name;
        std::size_t count;
        std::uint64_t offset;
    } splits[3] = {{"train", n_train, 0}, {"val", n_val, kSplitStride}, {"test", n_test, 2 * kSplitStride}};

    for (const auto& split : splits) {
        json pairs = json::array();
        for (std::size_t i = 0; i < split.count; ++i) {
            const std::uint64_t pair_seed = seed * (3 * kSplitStride) + split.offset + i;
            const SynthPair pair = generate_pair(pair_seed, config);
            char id[64];
            std::snprintf(id, sizeof(id), "%s_%05zu", split.name, i);
            const std::string rel_a = std::string("images/") + id + "_a.smt";
            const std::string rel_b = std::string("images/") + id + "_b.smt";
            save_smt((fs::path(out_dir) / rel_a).string(), pair.image_a.data);
            save_smt((fs::path(out_dir) / rel_b).string(), pair.image_b.data);
            json ka = json::array(), kb = json::array();
            for (const auto& p : pair.keypoints_a) ka.push_back({p.row, p.col});
            for (const auto& q : pair.keypoints_b) kb.push_back({q.row, q.col});
            pairs.push_back({{"id", id},
                             {"seed", pair_seed},
                             {"warp_kind", pair.warp.kind},
                             {"image_a", rel_a},
                             {"image_b", rel_b},
                             {"keypoints_a", ka},
                             {"keypoints_b", kb},
                             {"bbox_b", {pair.bbox_b.first, pair.bbox_b.second}}});
        }
        json doc{{"version", 1}, {"config", config_to_json(config)}, {"pairs", pairs}};
        const fs::path json_path = fs::path(out_dir) / (std::string(split.name) + ".json");
        std::ofstream out(json_path);
        if (!out) throw std::runtime_error("generate_split: cannot open " + json_path.string());
        out << doc.dump(2) << "\n";
        if (!out) throw std::runtime_error("generate_split: write failed for " + json_path.string());
    }
}

Dataset load_dataset(const std::string& json_path) {
    std::ifstream in(json_path);
    if (!in) throw std::runtime_error("load_dataset: cannot open " + json_path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw std::invalid_argument("load_dataset: malformed JSON in " + json_path + ": " + e.what());
    }
    if (!doc.contains("pairs") || !doc["pairs"].is_array())
        throw std::invalid_argument("load_dataset: missing pairs array in " + json_path);

    const std::filesystem::path base = std::filesystem::path(json_path).parent_path();
    auto load_image = [&](const std::string& rel) {
        auto [shape, values] = load_smt((base / rel).string());
        if (shape.size() != 3)
            throw std::invalid_argument("load_dataset: image " + rel + " is not rank 3");
        Image img{shape[0], shape[1], shape[2], Tensor()};
        img.data = Tensor::from_data(std::move(shape), std::move(values));
        return img;
    };
    auto load_points = [](const json& arr, const std::string& what) {
        if (!arr.is_array()) throw std::invalid_argument("load_dataset: " + what + " must be an array");
        std::vector<Point> pts;
        for (const auto& e : arr) {
            if (!e.is_array() || e.size() != 2)
                throw std::invalid_argument("load_dataset: " + what + " entries must be [row, col]");
            pts.push_back({e[0].get<double>(), e[1].get<double>()});
        }
        return pts;
    };

    Dataset data;
    for (const auto& entry : doc["pairs"]) {
        DatasetPair pair;
        pair.id = entry.value("id", std::string("pair_") + std::to_string(data.pairs.size()));
        pair.image_a = load_image(entry.at("image_a").get<std::string>());
        pair.image_b = load_image(entry.at("image_b").get<std::string>());
        pair.keypoints_a = load_points(entry.at("keypoints_a"), "keypoints_a");
        pair.keypoints_b = load_points(entry.at("keypoints_b"), "keypoints_b");
        if (pair.keypoints_a.size() != pair.keypoints_b.size() || pair.keypoints_a.empty())
            throw std::invalid_argument("load_dataset: keypoint lists must be non-empty and equal length");
        if (entry.contains("bbox_b")) {
            const auto& bb = entry["bbox_b"];
            if (!bb.is_array() || bb.size() != 2)
                throw std::invalid_argument("load_dataset: bbox_b must be [height, width]");
            pair.bbox_b = std::make_pair(bb[0].get<double>(), bb[1].get<double>());
        }
        data.pairs.push_back(std::move(pair));
    }
    return data;
}

CorrespondenceSet to_correspondence_set(const DatasetPair& pair) {
    CorrespondenceSet set;
    set.points_a = pair.keypoints_a;
    set.points_b = pair.keypoints_b;
    set.height_a = pair.image_a.height;
    set.width_a = pair.image_a.width;
    set.height_b = pair.image_b.height;
    set.width_b = pair.image_b.width;
    set.bbox_b = pair.bbox_b;
    return set;
}

}  // namespace simsc
