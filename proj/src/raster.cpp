#include "guttation/raster.hpp"

#include <fstream>
#include <iterator>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "guttation/errors.hpp"

namespace guttation {

namespace {

cv::Mat to_bgr(const Raster& image) {
    cv::Mat rgb(image.height, image.width, CV_8UC3, const_cast<std::uint8_t*>(image.pixels.data()));
    cv::Mat bgr;
    cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
    return bgr;
}

std::vector<std::uint8_t> encode(const Raster& image, const char* ext, const std::vector<int>& params) {
    std::vector<std::uint8_t> out;
    if (!cv::imencode(ext, to_bgr(image), out, params))
        throw Error(ErrorCode::IoError, std::string("failed to encode ") + ext);
    return out;
}

}  // namespace

void Raster::fill(const Color& c) {
    const std::uint8_t r = to_byte(c.r), g = to_byte(c.g), b = to_byte(c.b);
    for (std::size_t i = 0; i < pixels.size(); i += 3) {
        pixels[i] = r;
        pixels[i + 1] = g;
        pixels[i + 2] = b;
    }
}

Raster decode_image(std::span<const std::uint8_t> bytes) {
    if (bytes.empty()) throw Error(ErrorCode::ImageDecodeError, "empty image payload");
    cv::Mat buf(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<std::uint8_t*>(bytes.data()));
    cv::Mat bgr;
    try {
        bgr = cv::imdecode(buf, cv::IMREAD_COLOR);
    } catch (const cv::Exception& e) {
        throw Error(ErrorCode::ImageDecodeError, std::string("image decode failed: ") + e.what());
    }
    if (bgr.empty() || bgr.depth() != CV_8U)
        throw Error(ErrorCode::ImageDecodeError, "not a decodable PNG/JPEG image");
    Raster out(bgr.cols, bgr.rows);
    cv::Mat rgb(out.height, out.width, CV_8UC3, out.pixels.data());
    cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
    return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Raster read_image(const std::filesystem::path& path) { return decode_image(read_file_bytes(path)); }

std::vector<std::uint8_t> encode_png(const Raster& image) {
    return encode(image, ".png", {cv::IMWRITE_PNG_COMPRESSION, 3});
}

std::vector<std::uint8_t> encode_jpeg(const Raster& image, int quality) {
    return encode(image, ".jpg", {cv::IMWRITE_JPEG_QUALITY, quality});
}

void write_png(const std::filesystem::path& path, const Raster& image) {
    const auto bytes = encode_png(image);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::IoError, "short write to " + path.string());
}

}  // namespace guttation
