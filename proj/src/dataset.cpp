#include "exitwise/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "exitwise/errors.hpp"
#include "exitwise/rng.hpp"

namespace exitwise {

namespace {

constexpr int kCifarDim = 32;
constexpr int kCifarChannels = 3;
constexpr int kCifarClasses = 10;
constexpr std::size_t kPixelBytes = kCifarDim * kCifarDim * kCifarChannels;  // 3072
constexpr std::size_t kRecordBytes = kPixelBytes + 1;                        // 3073

void append_records(const std::filesystem::path& file, std::vector<LabeledImage>& out) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw IoError("cannot open dataset file: " + file.string());
    in.seekg(0, std::ios::end);
    const std::size_t bytes = static_cast<std::size_t>(in.tellg());
    in.seekg(0);
    if (bytes % kRecordBytes != 0) {
        throw FormatError(file.string() + ": length " + std::to_string(bytes) +
                          " is not a multiple of the 3073-byte record size");
    }
    const std::size_t records = bytes / kRecordBytes;
    std::vector<unsigned char> buf(kRecordBytes);
    for (std::size_t r = 0; r < records; ++r) {
        in.read(reinterpret_cast<char*>(buf.data()), kRecordBytes);
        if (!in) throw IoError("short read from " + file.string());
        const int label = buf[0];
        if (label >= kCifarClasses) {
            throw FormatError(file.string() + ": record " + std::to_string(r) +
                              " has corrupt label byte " + std::to_string(label));
        }
        TensorF pixels({kCifarDim, kCifarDim, kCifarChannels});
        // Planes are stored channel-major: 1024 red bytes, then green, blue.
        for (int c = 0; c < kCifarChannels; ++c) {
            const unsigned char* plane = buf.data() + 1 + c * kCifarDim * kCifarDim;
            for (int y = 0; y < kCifarDim; ++y)
                for (int x = 0; x < kCifarDim; ++x)
                    pixels.at3(y, x, c) =
                        static_cast<float>(plane[y * kCifarDim + x]) / 255.0f;
        }
        out.push_back({std::move(pixels), label});
    }
}

}  // namespace

Dataset load_cifar10_batch_file(const std::filesystem::path& file, std::string name) {
    Dataset ds;
    ds.class_count = kCifarClasses;
    ds.name = std::move(name);
    append_records(file, ds.images);
    if (ds.images.empty()) throw FormatError(file.string() + ": no records");
    return ds;
}

std::pair<Dataset, Dataset> load_cifar10(const std::filesystem::path& directory) {
    for (int b = 1; b <= 5; ++b) {
        const auto f = directory / ("data_batch_" + std::to_string(b) + ".bin");
        if (!std::filesystem::exists(f))
            throw IoError("missing CIFAR-10 file: " + f.string());
    }
    if (!std::filesystem::exists(directory / "test_batch.bin"))
        throw IoError("missing CIFAR-10 file: " + (directory / "test_batch.bin").string());

    Dataset train;
    train.class_count = kCifarClasses;
    train.name = "cifar10-train";
    for (int b = 1; b <= 5; ++b)
        append_records(directory / ("data_batch_" + std::to_string(b) + ".bin"),
                       train.images);
    Dataset test = load_cifar10_batch_file(directory / "test_batch.bin", "cifar10-test");
    if (train.images.empty()) throw FormatError("CIFAR-10 training batches are empty");
    return {std::move(train), std::move(test)};
}

void write_cifar10_batch(const Dataset& dataset, const std::filesystem::path& file) {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write dataset file: " + file.string());
    std::vector<unsigned char> buf(kRecordBytes);
    for (const LabeledImage& img : dataset.images) {
        if (img.pixels.extent(0) != kCifarDim || img.pixels.extent(1) != kCifarDim ||
            img.pixels.extent(2) != kCifarChannels) {
            throw DimensionError("CIFAR-10 writer needs 32x32x3 images, got " +
                                 shape_to_string(img.pixels.shape()));
        }
        buf[0] = static_cast<unsigned char>(img.label);
        for (int c = 0; c < kCifarChannels; ++c) {
            unsigned char* plane = buf.data() + 1 + c * kCifarDim * kCifarDim;
            for (int y = 0; y < kCifarDim; ++y)
                for (int x = 0; x < kCifarDim; ++x) {
                    const long v = std::lround(img.pixels.at3(y, x, c) * 255.0f);
                    plane[y * kCifarDim + x] =
                        static_cast<unsigned char>(std::clamp(v, 0L, 255L));
                }
        }
        out.write(reinterpret_cast<const char*>(buf.data()), kRecordBytes);
    }
    if (!out) throw IoError("write failed: " + file.string());
}

std::pair<Dataset, Dataset> split_validation(const Dataset& train, double fraction,
                                             std::uint64_t seed) {
    if (fraction <= 0.0 || fraction >= 1.0)
        throw ParameterError("validation fraction must lie in (0, 1), got " +
                             std::to_string(fraction));
    const std::size_t n = train.size();
    if (n < 2) throw ParameterError("dataset too small to split");

    std::size_t target = static_cast<std::size_t>(std::llround(
        static_cast<double>(n) * fraction));
    target = std::clamp<std::size_t>(target, 1, n - 1);

    // Shuffle indices within each class, then take a proportional share per
    // class (floor + largest remainder) so proportions hold within one image.
    std::vector<std::vector<std::size_t>> by_class(
        static_cast<std::size_t>(train.class_count));
    for (std::size_t i = 0; i < n; ++i) {
        const int label = train.images[i].label;
        if (label < 0 || label >= train.class_count)
            throw FormatError("label outside class range during split");
        by_class[static_cast<std::size_t>(label)].push_back(i);
    }
    Rng rng(mix_seed(seed, seed_salt::kSplit));
    for (auto& idx : by_class) std::shuffle(idx.begin(), idx.end(), rng);

    std::vector<std::size_t> take(by_class.size(), 0);
    std::vector<std::pair<double, std::size_t>> remainders;  // (-rem, class)
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        const double ideal = static_cast<double>(by_class[c].size()) * fraction;
        take[c] = static_cast<std::size_t>(ideal);
        take[c] = std::min(take[c], by_class[c].size());
        assigned += take[c];
        remainders.emplace_back(-(ideal - static_cast<double>(take[c])), c);
    }
    std::sort(remainders.begin(), remainders.end());
    for (auto& [neg_rem, c] : remainders) {
        if (assigned >= target) break;
        if (take[c] < by_class[c].size()) {
            ++take[c];
            ++assigned;
        }
    }
    // Rounding can leave a shortfall when some classes are exhausted.
    for (std::size_t c = 0; assigned < target && c < by_class.size(); ++c) {
        while (assigned < target && take[c] < by_class[c].size()) {
            ++take[c];
            ++assigned;
        }
    }
    while (assigned > target) {
        for (std::size_t c = 0; c < by_class.size() && assigned > target; ++c) {
            if (take[c] > 0) {
                --take[c];
                --assigned;
            }
        }
    }

    Dataset kept, val;
    kept.class_count = val.class_count = train.class_count;
    kept.name = train.name;
    val.name = train.name + "-val";
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        for (std::size_t k = 0; k < by_class[c].size(); ++k) {
            const LabeledImage& img = train.images[by_class[c][k]];
            (k < take[c] ? val : kept).images.push_back(img);
        }
    }
    return {std::move(kept), std::move(val)};
}

Dataset synthetic_blobs(int n_per_class, int class_count, int image_h, int image_w,
                        int image_c, double separation, std::uint64_t seed,
                        std::uint64_t variant) {
    if (separation < 0.0) throw ParameterError("separation must be >= 0");
    if (n_per_class < 1 || class_count < 2)
        throw ParameterError("need at least one image per class and two classes");
    const std::size_t dim = static_cast<std::size_t>(image_h) * image_w * image_c;
    constexpr double kNoiseSigma = 0.1;

    // Templates depend on the seed alone; the noise stream also folds in the
    // variant so several draws share one class layout.
    Rng template_rng(mix_seed(seed, seed_salt::kBlobs));
    Rng noise_rng(mix_seed(seed, seed_salt::kBlobs, variant + 1));
    std::normal_distribution<double> gauss(0.0, 1.0);

    // Class templates: 0.5 plus separation * sigma along a random unit
    // direction, so inter-template distances scale with `separation` while
    // per-pixel offsets stay small enough to avoid heavy clamping.
    std::vector<std::vector<double>> templates(static_cast<std::size_t>(class_count));
    for (auto& t : templates) {
        t.resize(dim);
        double norm2 = 0.0;
        for (double& v : t) {
            v = gauss(template_rng);
            norm2 += v * v;
        }
        const double scale =
            norm2 > 0.0 ? separation * kNoiseSigma / std::sqrt(norm2) : 0.0;
        for (double& v : t) v = 0.5 + v * scale;
    }

    Dataset ds;
    ds.class_count = class_count;
    ds.name = "synthetic-blobs";
    ds.images.reserve(static_cast<std::size_t>(n_per_class) * class_count);
    const std::vector<std::size_t> shape{static_cast<std::size_t>(image_h),
                                         static_cast<std::size_t>(image_w),
                                         static_cast<std::size_t>(image_c)};
    for (int c = 0; c < class_count; ++c) {
        for (int i = 0; i < n_per_class; ++i) {
            TensorF pixels(shape);
            for (std::size_t k = 0; k < dim; ++k) {
                const double v = templates[static_cast<std::size_t>(c)][k] +
                                 kNoiseSigma * gauss(noise_rng);
                pixels[k] = static_cast<float>(std::clamp(v, 0.0, 1.0));
            }
            ds.images.push_back({std::move(pixels), c});
        }
    }
    return ds;
}

}  // namespace exitwise
