#include "image_data.hpp"

#include <cctype>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <vector>

#include <openssl/evp.h>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "vivecap/gateway.hpp"

namespace vivecap::detail {
namespace {

using Kind = vlm::GatewayError::Kind;
using vlm::GatewayError;

std::string base64(const std::string& bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                          reinterpret_cast<const unsigned char*>(bytes.data()), static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::string lower_extension(const std::string& path) {
  std::string ext = std::filesystem::path(path).extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext;
}

std::string mime_type(const std::string& path) {
  const std::string ext = lower_extension(path);
  if (ext == ".png") return "image/png";
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".webp") return "image/webp";
  if (ext == ".gif") return "image/gif";
  if (ext == ".bmp") return "image/bmp";
  return "application/octet-stream";
}

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw GatewayError(Kind::Image, "cannot read image " + path);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Raw file bytes, or a re-encoded copy when the longer side exceeds max_side.
std::string image_bytes(const std::string& path, int max_side) {
  if (max_side <= 0) return read_bytes(path);
  cv::Mat img = cv::imread(path, cv::IMREAD_UNCHANGED);
  if (img.empty()) throw GatewayError(Kind::Image, "cannot decode image " + path);
  const int longer = std::max(img.cols, img.rows);
  if (longer <= max_side) return read_bytes(path);
  const double scale = static_cast<double>(max_side) / longer;
  cv::Mat small;
  cv::resize(img, small, cv::Size(std::max(1, static_cast<int>(std::lround(img.cols * scale))),
                                  std::max(1, static_cast<int>(std::lround(img.rows * scale)))),
             0, 0, cv::INTER_AREA);
  std::string ext = lower_extension(path);
  if (ext != ".png" && ext != ".jpg" && ext != ".jpeg") ext = ".png";
  std::vector<unsigned char> buf;
  if (!cv::imencode(ext, small, buf)) throw GatewayError(Kind::Image, "cannot re-encode image " + path);
  return {buf.begin(), buf.end()};
}

}  // namespace

std::string image_data_url(const std::string& path, int max_side) {
  std::string mime = mime_type(path);
  if (max_side > 0 && mime != "image/png" && mime != "image/jpeg") mime = "image/png";
  return "data:" + mime + ";base64," + base64(image_bytes(path, max_side));
}

}  // namespace vivecap::detail
