#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "exitwise/dataset.hpp"
#include "exitwise/errors.hpp"
#include "exitwise/rng.hpp"
#include "oracles.hpp"

using namespace exitwise;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("exitwise_test_" + std::to_string(Rng(std::random_device{}())()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

void write_batch_raw(const fs::path& file, int records, unsigned char label,
                     unsigned char pixel) {
    std::ofstream out(file, std::ios::binary);
    std::vector<unsigned char> rec(3073, pixel);
    rec[0] = label;
    for (int r = 0; r < records; ++r)
        out.write(reinterpret_cast<const char*>(rec.data()), 3073);
}

Dataset random_cifar_like(int n, Rng& rng) {
    Dataset ds;
    ds.class_count = 10;
    ds.name = "random";
    std::uniform_int_distribution<int> byte(0, 255), label(0, 9);
    for (int i = 0; i < n; ++i) {
        TensorF pixels({32, 32, 3});
        for (std::size_t k = 0; k < pixels.size(); ++k)
            pixels[k] = static_cast<float>(byte(rng)) / 255.0f;
        ds.images.push_back({std::move(pixels), label(rng)});
    }
    return ds;
}

}  // namespace

TEST_SUITE_BEGIN("dataset");

TEST_CASE("loader: canonical layout with scaled-down batches") {
    TempDir dir;
    for (int b = 1; b <= 5; ++b)
        write_batch_raw(dir.path / ("data_batch_" + std::to_string(b) + ".bin"), 100,
                        static_cast<unsigned char>(b % 10), 128);
    write_batch_raw(dir.path / "test_batch.bin", 40, 7, 200);

    const auto [train, test] = load_cifar10(dir.path);
    CHECK(train.size() == 500);
    CHECK(test.size() == 40);
    CHECK(train.class_count == 10);
    for (const auto& img : train.images) {
        CHECK(img.label >= 0);
        CHECK(img.label <= 9);
    }
    CHECK(test.images.front().label == 7);
    CHECK(test.images.front().pixels[0] == doctest::Approx(200.0 / 255.0));
}

TEST_CASE("loader: truncated file is a format error") {
    TempDir dir;
    const fs::path f = dir.path / "bad.bin";
    write_batch_raw(f, 2, 1, 10);
    std::ofstream(f, std::ios::binary | std::ios::app) << 'x';  // 3073*2 + 1 bytes
    CHECK_THROWS_AS(load_cifar10_batch_file(f, "bad"), FormatError);
}

TEST_CASE("loader: single record, label 3, all pixel bytes 255") {
    TempDir dir;
    const fs::path f = dir.path / "one.bin";
    write_batch_raw(f, 1, 3, 255);
    const Dataset ds = load_cifar10_batch_file(f, "one");
    REQUIRE(ds.size() == 1);
    CHECK(ds.images[0].label == 3);
    for (std::size_t k = 0; k < ds.images[0].pixels.size(); ++k)
        CHECK(ds.images[0].pixels[k] == 1.0f);
}

TEST_CASE("loader: corrupt label byte is a format error") {
    TempDir dir;
    const fs::path f = dir.path / "corrupt.bin";
    write_batch_raw(f, 1, 11, 0);
    CHECK_THROWS_AS(load_cifar10_batch_file(f, "corrupt"), FormatError);
}

TEST_CASE("loader: missing files are I/O errors that name the file") {
    TempDir dir;
    try {
        load_cifar10(dir.path);
        FAIL("expected IoError");
    } catch (const IoError& e) {
        CHECK(std::string(e.what()).find("data_batch_1.bin") != std::string::npos);
    }
}

TEST_CASE("round trip: binary write then load reproduces the dataset bit-exactly") {
    TempDir dir;
    Rng rng(404);
    const Dataset original = random_cifar_like(25, rng);
    const fs::path f = dir.path / "roundtrip.bin";
    write_cifar10_batch(original, f);
    const Dataset loaded = load_cifar10_batch_file(f, "roundtrip");
    REQUIRE(loaded.size() == original.size());
    for (std::size_t i = 0; i < loaded.size(); ++i) {
        CHECK(loaded.images[i].label == original.images[i].label);
        CHECK(loaded.images[i].pixels == original.images[i].pixels);
    }
}

TEST_CASE("split: 10 percent of a balanced set") {
    Rng rng(1);
    Dataset ds;
    ds.class_count = 10;
    ds.name = "balanced";
    for (int c = 0; c < 10; ++c)
        for (int i = 0; i < 50; ++i)
            ds.images.push_back({TensorF({1, 1, 1}, {static_cast<float>(c)}), c});
    const auto [train, val] = split_validation(ds, 0.1, 7);
    CHECK(train.size() == 450);
    CHECK(val.size() == 50);
    // Stratified: every class contributes exactly 5 to validation.
    std::vector<int> counts(10, 0);
    for (const auto& img : val.images) ++counts[static_cast<std::size_t>(img.label)];
    for (int c : counts) CHECK(c == 5);
}

TEST_CASE("split: identical seeds give identical splits") {
    Rng rng(2);
    const Dataset ds = random_cifar_like(64, rng);
    const auto [a_train, a_val] = split_validation(ds, 0.25, 99);
    const auto [b_train, b_val] = split_validation(ds, 0.25, 99);
    REQUIRE(a_val.size() == b_val.size());
    for (std::size_t i = 0; i < a_val.size(); ++i)
        CHECK(a_val.images[i].pixels == b_val.images[i].pixels);
    const auto [c_train, c_val] = split_validation(ds, 0.25, 100);
    bool all_same = c_val.size() == a_val.size();
    if (all_same)
        for (std::size_t i = 0; i < a_val.size(); ++i)
            all_same = all_same && a_val.images[i].pixels == c_val.images[i].pixels;
    CHECK_FALSE(all_same);
}

TEST_CASE("split: one image per class at fraction 0.5") {
    Dataset ds;
    ds.class_count = 10;
    ds.name = "tiny";
    for (int c = 0; c < 10; ++c)
        ds.images.push_back({TensorF({1, 1, 1}, {static_cast<float>(c)}), c});
    const auto [train, val] = split_validation(ds, 0.5, 3);
    CHECK(train.size() == 5);
    CHECK(val.size() == 5);
    std::set<int> train_classes, val_classes;
    for (const auto& img : train.images) train_classes.insert(img.label);
    for (const auto& img : val.images) val_classes.insert(img.label);
    CHECK(train_classes.size() == 5);
    CHECK(val_classes.size() == 5);
}

TEST_CASE("split: disjoint and exhaustive for random fractions and seeds") {
    Rng rng(17);
    std::uniform_real_distribution<double> frac(0.05, 0.95);
    for (int trial = 0; trial < 10; ++trial) {
        Dataset ds;
        ds.class_count = 5;
        ds.name = "ids";
        const int n = 40 + trial * 13;
        for (int i = 0; i < n; ++i)
            ds.images.push_back(
                {TensorF({1, 1, 1}, {static_cast<float>(i)}), i % 5});
        const auto [train, val] = split_validation(ds, frac(rng), rng());
        CHECK(train.size() + val.size() == static_cast<std::size_t>(n));
        std::set<int> seen;
        for (const auto& img : train.images)
            seen.insert(static_cast<int>(img.pixels[0]));
        for (const auto& img : val.images)
            seen.insert(static_cast<int>(img.pixels[0]));
        CHECK(seen.size() == static_cast<std::size_t>(n));  // disjoint + exhaustive
    }
}

TEST_CASE("split: fraction out of range") {
    Rng rng(5);
    const Dataset ds = random_cifar_like(10, rng);
    CHECK_THROWS_AS(split_validation(ds, 0.0, 1), ParameterError);
    CHECK_THROWS_AS(split_validation(ds, 1.0, 1), ParameterError);
    CHECK_THROWS_AS(split_validation(ds, -2.0, 1), ParameterError);
}

TEST_CASE("blobs: zero separation is chance-level for a nearest-mean classifier") {
    const Dataset train = synthetic_blobs(60, 10, 8, 8, 1, 0.0, 41, 0);
    const Dataset test = synthetic_blobs(40, 10, 8, 8, 1, 0.0, 41, 1);
    CHECK(oracle::nearest_mean_accuracy(train, test) <= 0.25);
}

TEST_CASE("blobs: wide separation is perfectly separable") {
    const Dataset train = synthetic_blobs(30, 10, 8, 8, 1, 10.0, 77, 0);
    const Dataset test = synthetic_blobs(30, 10, 8, 8, 1, 10.0, 77, 1);
    CHECK(oracle::nearest_mean_accuracy(train, test) == 1.0);
}

TEST_CASE("blobs: fixed seed reproduces the dataset") {
    const Dataset a = synthetic_blobs(5, 3, 4, 4, 2, 2.0, 9);
    const Dataset b = synthetic_blobs(5, 3, 4, 4, 2, 2.0, 9);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.images[i].label == b.images[i].label);
        CHECK(a.images[i].pixels == b.images[i].pixels);
    }
}

TEST_CASE("blobs: separation monotonically helps the nearest-mean oracle") {
    double prev = 0.0;
    for (double sep : {0.5, 2.0, 6.0}) {
        const Dataset train = synthetic_blobs(40, 6, 6, 6, 1, sep, 11, 0);
        const Dataset test = synthetic_blobs(30, 6, 6, 6, 1, sep, 11, 1);
        const double acc = oracle::nearest_mean_accuracy(train, test);
        CHECK(acc >= prev - 0.05);
        prev = acc;
    }
}

TEST_SUITE_END();
