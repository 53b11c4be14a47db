#include "depthpatch/defense.hpp"

#include <jpeglib.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstring>

#include "depthpatch/applier.hpp"
#include "depthpatch/errors.hpp"
#include "depthpatch/rng.hpp"

namespace depthpatch {

void DefenseSpec::validate() const {
    switch (kind) {
        case Kind::jpeg: {
            const int q = static_cast<int>(parameter);
            if (q < 1 || q > 100 || parameter != q)
                throw ConfigError("defense jpeg: quality must be an integer in [1,100]");
            break;
        }
        case Kind::median_blur: {
            const int k = static_cast<int>(parameter);
            if (k < 1 || parameter != k)
                throw ConfigError("defense median_blur: kernel must be a positive integer");
            break;
        }
        case Kind::gaussian_noise:
            if (parameter < 0.0)
                throw ConfigError("defense gaussian_noise: sigma must be >= 0");
            break;
    }
}

DefenseSpec DefenseSpec::parse(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos)
        throw ConfigError("defense spec must look like kind:param, got '" + text + "'");
    const std::string kind_str = text.substr(0, colon);
    DefenseSpec spec;
    if (kind_str == "jpeg")
        spec.kind = Kind::jpeg;
    else if (kind_str == "median_blur")
        spec.kind = Kind::median_blur;
    else if (kind_str == "gaussian_noise")
        spec.kind = Kind::gaussian_noise;
    else
        throw ConfigError("unsupported defense kind '" + kind_str + "'");
    try {
        spec.parameter = std::stod(text.substr(colon + 1));
    } catch (const std::exception&) {
        throw ConfigError("defense parameter is not a number in '" + text + "'");
    }
    spec.validate();
    return spec;
}

std::string DefenseSpec::name() const {
    switch (kind) {
        case Kind::jpeg: return "jpeg";
        case Kind::median_blur: return "median_blur";
        case Kind::gaussian_noise: return "gaussian_noise";
    }
    return "?";
}

namespace {

struct JpegErrorMgr {
    jpeg_error_mgr pub;
    std::jmp_buf jump;
};

void jpeg_error_exit(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
    std::longjmp(err->jump, 1);
}

Image jpeg_round_trip(const Image& image, int quality) {
    const int H = image.h, W = image.w;
    std::vector<unsigned char> rgb(static_cast<size_t>(H) * W * 3);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            for (int ch = 0; ch < 3; ++ch)
                rgb[(static_cast<size_t>(y) * W + x) * 3 + ch] = static_cast<unsigned char>(
                    std::lround(std::clamp(image.at(ch, y, x), 0.0, 1.0) * 255.0));

    // Encode.
    jpeg_compress_struct cinfo;
    JpegErrorMgr jerr;
    cinfo.err = jpeg_std_error(&jerr.pub);
    jerr.pub.error_exit = jpeg_error_exit;
    unsigned char* buffer = nullptr;
    unsigned long buffer_size = 0;
    if (setjmp(jerr.jump)) {
        jpeg_destroy_compress(&cinfo);
        if (buffer) free(buffer);
        throw NumericError("jpeg defense: encoder failure");
    }
    jpeg_create_compress(&cinfo);
    jpeg_mem_dest(&cinfo, &buffer, &buffer_size);
    cinfo.image_width = W;
    cinfo.image_height = H;
    cinfo.input_components = 3;
    cinfo.in_color_space = JCS_RGB;
    jpeg_set_defaults(&cinfo);  // baseline sequential, 4:2:0 for color
    jpeg_set_quality(&cinfo, quality, TRUE);
    jpeg_start_compress(&cinfo, TRUE);
    while (cinfo.next_scanline < cinfo.image_height) {
        JSAMPROW row = &rgb[static_cast<size_t>(cinfo.next_scanline) * W * 3];
        jpeg_write_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_compress(&cinfo);
    jpeg_destroy_compress(&cinfo);

    // Decode.
    jpeg_decompress_struct dinfo;
    JpegErrorMgr derr;
    dinfo.err = jpeg_std_error(&derr.pub);
    derr.pub.error_exit = jpeg_error_exit;
    if (setjmp(derr.jump)) {
        jpeg_destroy_decompress(&dinfo);
        free(buffer);
        throw NumericError("jpeg defense: decoder failure");
    }
    jpeg_create_decompress(&dinfo);
    jpeg_mem_src(&dinfo, buffer, buffer_size);
    jpeg_read_header(&dinfo, TRUE);
    dinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&dinfo);

    Image out(3, H, W);
    std::vector<unsigned char> row(static_cast<size_t>(W) * 3);
    int y = 0;
    while (dinfo.output_scanline < dinfo.output_height) {
        JSAMPROW rows[1] = {row.data()};
        jpeg_read_scanlines(&dinfo, rows, 1);
        for (int x = 0; x < W; ++x)
            for (int ch = 0; ch < 3; ++ch)
                out.at(ch, y, x) = row[static_cast<size_t>(x) * 3 + ch] / 255.0;
        ++y;
    }
    jpeg_finish_decompress(&dinfo);
    jpeg_destroy_decompress(&dinfo);
    free(buffer);
    return out;
}

inline int reflect(int i, int n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - i - 1;
    return i;
}

Image median_blur(const Image& image, int k) {
    const int H = image.h, W = image.w;
    // Window start offset: floor(k/2) above/left of the anchor.
    const int lo = -(k / 2);
    Image out(3, H, W);
    std::vector<double> window(static_cast<size_t>(k) * k);
    const size_t mid = (window.size() - 1) / 2;  // lower median for even k^2
    for (int ch = 0; ch < 3; ++ch)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                size_t idx = 0;
                for (int dy = 0; dy < k; ++dy)
                    for (int dx = 0; dx < k; ++dx)
                        window[idx++] =
                            image.at(ch, reflect(y + lo + dy, H), reflect(x + lo + dx, W));
                std::nth_element(window.begin(), window.begin() + mid, window.end());
                out.at(ch, y, x) = window[mid];
            }
    return out;
}

Image gaussian_noise(const Image& image, double sigma, std::uint64_t seed) {
    if (sigma == 0.0) return image;
    Image out = image;
    Rng rng(hash_combine(seed, hash_str("gaussian-defense")));
    for (double& x : out.v) x = std::clamp(x + sigma * rng.normal(), 0.0, 1.0);
    return out;
}

}  // namespace

Image apply_defense(const Image& image, const DefenseSpec& spec) {
    spec.validate();
    switch (spec.kind) {
        case DefenseSpec::Kind::jpeg:
            return jpeg_round_trip(image, static_cast<int>(spec.parameter));
        case DefenseSpec::Kind::median_blur:
            return median_blur(image, static_cast<int>(spec.parameter));
        case DefenseSpec::Kind::gaussian_noise:
            return gaussian_noise(image, spec.parameter, spec.seed);
    }
    throw ConfigError("apply_defense: unsupported kind");
}

DefendedMetrics evaluate_defended(const DepthModel& model,
                                  const std::vector<SceneSample>& scenes,
                                  const Patch& patch, const DefenseSpec& spec,
                                  const EvalOptions& opts) {
    spec.validate();
    DefendedMetrics out;
    for (size_t si = 0; si < scenes.size(); ++si) {
        const SceneSample& scene = scenes[si];
        const std::vector<Detection> detections = placeable_detections(scene, opts);
        if (detections.empty()) continue;

        ApplyOptions apply_opts;
        apply_opts.patch_scale = opts.patch_scale;
        apply_opts.scale_mode = opts.scale_mode;
        const ApplyResult applied = apply_all(scene.image, patch, detections, apply_opts);

        DefenseSpec scene_spec = spec;
        scene_spec.seed = hash_combine(spec.seed, hash_str(scene.id));

        const DisparityMap d = model.predict(scene.image);
        const DisparityMap d_def = model.predict(apply_defense(applied.adv_image, scene_spec));
        const DisparityMap d_defb = model.predict(apply_defense(scene.image, scene_spec));

        double ed = 0.0, edb = 0.0;
        for (const auto& mp : applied.masks) {
            ed += compute_ed(d, d_def, mp.focus_mask);
            edb += compute_ed(d, d_defb, mp.focus_mask);
        }
        out.e_d += ed / static_cast<double>(applied.masks.size());
        out.e_d_benign += edb / static_cast<double>(applied.masks.size());
        ++out.n_scenes;
    }
    if (out.n_scenes == 0) throw DataError("evaluate_defended: no scenes with detections");
    out.e_d /= out.n_scenes;
    out.e_d_benign /= out.n_scenes;
    return out;
}

}  // namespace depthpatch
