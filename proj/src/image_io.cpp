#include "deltagan/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "deltagan/condmap.hpp"
#include "deltagan/error.hpp"

namespace deltagan {

namespace {

cv::Mat tensor_to_mat(const torch::Tensor& chw) {
  auto t = chw.detach().to(torch::kCPU, torch::kFloat32).permute({1, 2, 0}).contiguous();
  const int height = static_cast<int>(t.size(0));
  const int width = static_cast<int>(t.size(1));
  const int channels = static_cast<int>(t.size(2));
  cv::Mat view(height, width, CV_32FC(channels), t.data_ptr<float>());
  return view.clone();
}

torch::Tensor mat_to_tensor(const cv::Mat& mat) {
  cv::Mat m = mat.isContinuous() ? mat : mat.clone();
  const int channels = m.channels();
  auto t = torch::from_blob(m.data, {m.rows, m.cols, channels}, torch::kFloat32).clone();
  return t.permute({2, 0, 1}).contiguous();
}

void check_chw(const torch::Tensor& t, const char* what) {
  if (t.dim() != 3) {
    throw Error(ErrorKind::ShapeMismatch, std::string(what) + " must be [C,H,W]");
  }
}

}  // namespace

torch::Tensor decode_image(const std::vector<unsigned char>& bytes) {
  if (bytes.empty()) throw Error(ErrorKind::Io, "empty image buffer");
  cv::Mat bgr = cv::imdecode(bytes, cv::IMREAD_COLOR);
  if (bgr.empty()) throw Error(ErrorKind::Io, "could not decode image");
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  rgb.convertTo(rgb, CV_32FC3, 2.0 / 255.0, -1.0);
  return mat_to_tensor(rgb);
}

torch::Tensor load_image(const std::filesystem::path& path) {
  return decode_image(read_file(path));
}

std::vector<unsigned char> encode_png(const torch::Tensor& image) {
  check_chw(image, "image");
  if (image.size(0) != 3) throw Error(ErrorKind::ShapeMismatch, "image must have 3 channels");
  auto bytes = ((image.detach().to(torch::kFloat32).clamp(-1.0, 1.0) + 1.0) * 127.5).round();
  cv::Mat rgb = tensor_to_mat(bytes);
  cv::Mat rgb8;
  rgb.convertTo(rgb8, CV_8UC3);
  cv::Mat bgr;
  cv::cvtColor(rgb8, bgr, cv::COLOR_RGB2BGR);
  std::vector<unsigned char> out;
  if (!cv::imencode(".png", bgr, out)) throw Error(ErrorKind::Io, "PNG encoding failed");
  return out;
}

void save_png(const std::filesystem::path& path, const torch::Tensor& image) {
  write_file(path, encode_png(image));
}

std::vector<unsigned char> encode_mask_png(const torch::Tensor& mask) {
  check_chw(mask, "mask");
  auto scaled = (mask.detach().to(torch::kFloat32).clamp(0.0, 1.0) * 255.0).round();
  cv::Mat m = tensor_to_mat(scaled.slice(0, 0, 1));
  cv::Mat m8;
  m.convertTo(m8, CV_8UC1);
  std::vector<unsigned char> out;
  if (!cv::imencode(".png", m8, out)) throw Error(ErrorKind::Io, "PNG encoding failed");
  return out;
}

torch::Tensor resize_bilinear(const torch::Tensor& image, int height, int width) {
  check_chw(image, "image");
  if (image.size(1) == height && image.size(2) == width) return image.clone();
  cv::Mat src = tensor_to_mat(image);
  cv::Mat dst;
  cv::resize(src, dst, cv::Size(width, height), 0, 0, cv::INTER_LINEAR);
  auto out = mat_to_tensor(dst);
  return out.view({image.size(0), height, width});
}

torch::Tensor resize_nearest(const torch::Tensor& image, int height, int width) {
  check_chw(image, "image");
  if (image.size(1) == height && image.size(2) == width) return image.clone();
  cv::Mat src = tensor_to_mat(image);
  cv::Mat dst;
  cv::resize(src, dst, cv::Size(width, height), 0, 0, cv::INTER_NEAREST);
  auto out = mat_to_tensor(dst);
  return out.view({image.size(0), height, width});
}

torch::Tensor to_intensity(const torch::Tensor& image) {
  return ((image.detach().to(torch::kFloat64).clamp(-1.0, 1.0) + 1.0) * 127.5).round();
}

std::vector<unsigned char> encode_map_png(const ConditionalMap& map) {
  cv::Mat m(map.height(), map.width(), CV_8UC1);
  for (int row = 0; row < map.height(); ++row) {
    for (int col = 0; col < map.width(); ++col) {
      const float v = map.at(row, col);
      // 0.5 lands on 128 (round half up), matching the documented codec.
      m.at<unsigned char>(row, col) =
          static_cast<unsigned char>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0));
    }
  }
  std::vector<unsigned char> out;
  if (!cv::imencode(".png", m, out)) throw Error(ErrorKind::Io, "PNG encoding failed");
  return out;
}

ConditionalMap decode_map_png(const std::vector<unsigned char>& bytes) {
  cv::Mat m = cv::imdecode(bytes, cv::IMREAD_GRAYSCALE);
  if (m.empty()) throw Error(ErrorKind::Io, "could not decode map PNG");
  ConditionalMap map(m.rows, m.cols);
  for (int row = 0; row < m.rows; ++row) {
    for (int col = 0; col < m.cols; ++col) {
      const auto b = m.at<unsigned char>(row, col);
      map.at(row, col) = b == 128 ? 0.5f : static_cast<float>(b) / 255.0f;
    }
  }
  return map;
}

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string read_text(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return {bytes.begin(), bytes.end()};
}

void write_file(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  write_file(path, std::vector<unsigned char>(text.begin(), text.end()));
}

}  // namespace deltagan
