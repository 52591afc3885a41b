#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "exitwise/tensor.hpp"

namespace exitwise {

// One normalized image: pixels in [0,1], H x W x C, with its class label.
struct LabeledImage {
    TensorF pixels;
    int label = 0;
};

// Immutable after construction; safe to share across threads.
struct Dataset {
    std::vector<LabeledImage> images;
    int class_count = 0;
    std::string name;

    std::size_t size() const { return images.size(); }
    int image_h() const { return static_cast<int>(images.front().pixels.extent(0)); }
    int image_w() const { return static_cast<int>(images.front().pixels.extent(1)); }
    int image_c() const { return static_cast<int>(images.front().pixels.extent(2)); }
};

// Loads the canonical binary distribution: data_batch_{1..5}.bin plus
// test_batch.bin, 3073-byte records (label byte then R,G,B planes), pixels
// scaled by 1/255.
std::pair<Dataset, Dataset> load_cifar10(const std::filesystem::path& directory);

// Single batch file in the same record layout; class_count fixed at 10.
Dataset load_cifar10_batch_file(const std::filesystem::path& file, std::string name);

// Writes 32x32x3 10-class images back to the binary record layout,
// bit-exact round trip with the loader.
void write_cifar10_batch(const Dataset& dataset, const std::filesystem::path& file);

// Stratified, seeded, disjoint and exhaustive split; the second part holds
// round(size * fraction) images (clamped so neither side is empty) with
// per-class counts within one image of proportionality.
std::pair<Dataset, Dataset> split_validation(const Dataset& train, double fraction,
                                             std::uint64_t seed);

// Isotropic Gaussian blobs in pixel space around per-class template images.
// separation is measured in units of the noise sigma; 0 collapses every
// class onto one template, large values make classes trivially separable.
// Templates depend on the seed alone; variant selects an independent noise
// stream, so (seed, 0) and (seed, 1) are train/test draws from the same
// distribution.
Dataset synthetic_blobs(int n_per_class, int class_count, int image_h, int image_w,
                        int image_c, double separation, std::uint64_t seed,
                        std::uint64_t variant = 0);

}  // namespace exitwise
