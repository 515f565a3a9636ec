#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <torch/torch.h>

namespace deltagan {

// Colour images travel as [3,H,W] float32 RGB tensors scaled to [-1, 1].

torch::Tensor decode_image(const std::vector<unsigned char>& bytes);
torch::Tensor load_image(const std::filesystem::path& path);

std::vector<unsigned char> encode_png(const torch::Tensor& image);
void save_png(const std::filesystem::path& path, const torch::Tensor& image);

/// Single-channel [1,H,W] tensor in [0, 1] (attention masks) to 8-bit PNG.
std::vector<unsigned char> encode_mask_png(const torch::Tensor& mask);

/// Bilinear resize of a [C,H,W] float tensor.
torch::Tensor resize_bilinear(const torch::Tensor& image, int height, int width);

/// Nearest-neighbour resize; keeps the discrete value set of maps intact.
torch::Tensor resize_nearest(const torch::Tensor& image, int height, int width);

/// [-1,1] -> 8-bit intensities in [0,255] (rounded, float64).
torch::Tensor to_intensity(const torch::Tensor& image);

std::vector<unsigned char> read_file(const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::vector<unsigned char>& bytes);
void write_file(const std::filesystem::path& path, const std::string& text);

}  // namespace deltagan
