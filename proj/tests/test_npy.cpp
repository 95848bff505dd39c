#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "downscale/npy.hpp"

using namespace downscale;
namespace fs = std::filesystem;

namespace {

fs::path tmp(const std::string& name) {
    const auto d = fs::temp_directory_path() / "downscale_npy_test";
    fs::create_directories(d);
    return d / name;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

FieldStack stack_2x2x2(double fill) {
    return FieldStack(Grid({1.0, 2.0}, {3.0, 4.0}), {Date{2006, 6, 1}, Date{2006, 6, 2}},
                      std::vector<double>(8, fill), Space::raw);
}

}  // namespace

TEST(Npy, HeaderLayoutIsNumpyCompatible) {
    const auto p = tmp("layout.npy");
    const std::size_t shape[] = {2, 3};
    npy::write(p, npy::Dtype::f4, shape, std::vector<double>(6, 1.0));
    const auto bytes = slurp(p);
    ASSERT_GE(bytes.size(), 10u);
    EXPECT_EQ(bytes.substr(0, 6), std::string("\x93NUMPY"));
    EXPECT_EQ(bytes[6], 1);
    EXPECT_EQ(bytes[7], 0);
    const std::size_t hlen = std::size_t(std::uint8_t(bytes[8])) | (std::size_t(std::uint8_t(bytes[9])) << 8);
    EXPECT_EQ((10 + hlen) % 64, 0u);
    const auto header = bytes.substr(10, hlen);
    EXPECT_NE(header.find("'descr': '<f4'"), std::string::npos);
    EXPECT_NE(header.find("'fortran_order': False"), std::string::npos);
    EXPECT_NE(header.find("'shape': (2, 3)"), std::string::npos);
    EXPECT_EQ(header.back(), '\n');
    EXPECT_EQ(bytes.size(), 10 + hlen + 6 * 4);
    float first;
    std::memcpy(&first, bytes.data() + 10 + hlen, 4);
    EXPECT_EQ(first, 1.0f);
}

TEST(Npy, AllHalfStackLoads) {
    const auto p = tmp("half.npy");
    npy::save_stack(p, stack_2x2x2(0.5));
    const auto s = npy::load_stack(p);
    EXPECT_EQ(s.space(), Space::raw);
    EXPECT_EQ(s.n_layers(), 2u);
    for (double v : s.values()) EXPECT_EQ(v, 0.5);
}

TEST(Npy, SaveLoadIsBitIdentical) {
    const auto p = tmp("roundtrip.npy");
    std::vector<double> v;
    for (int i = 0; i < 8; ++i) v.push_back(double(float(0.1 * i + 1e-3)));  // float32-representable
    const FieldStack s(Grid({1.0, 2.0}, {3.0, 4.0}), {Date{2006, 6, 1}, Date{2006, 6, 2}}, v, Space::log10, "x");
    npy::save_stack(p, s);
    const auto r = npy::load_stack(p);
    EXPECT_EQ(r.values(), s.values());
    EXPECT_EQ(r.dates(), s.dates());
    EXPECT_EQ(r.grid(), s.grid());
    EXPECT_EQ(r.space(), Space::log10);
    const auto again = tmp("roundtrip2.npy");
    npy::save_stack(again, r);
    EXPECT_EQ(slurp(p), slurp(again));
}

TEST(Npy, TruncatedPayloadIsShapeMismatch) {
    // header claims 3 days, payload holds 2
    const auto p = tmp("short.npy");
    const std::size_t shape3[] = {3, 2, 2};
    npy::write(p, npy::Dtype::f4, shape3, std::vector<double>(12, 1.0));
    auto bytes = slurp(p);
    bytes.resize(bytes.size() - 4 * 4);
    std::ofstream(p, std::ios::binary) << bytes;
    try {
        npy::read(p);
        FAIL() << "expected a shape mismatch";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("shape mismatch"), std::string::npos);
    }
}

TEST(Npy, SidecarDateCountMustMatch) {
    const auto p = tmp("dates.npy");
    npy::save_stack(p, stack_2x2x2(1.0));
    auto meta = npy::read_json(npy::meta_path(p));
    meta["dates"] = {"2006-06-01"};
    std::ofstream(npy::meta_path(p)) << meta.dump();
    EXPECT_THROW(npy::load_stack(p), ValidationError);
}

TEST(Npy, NanNeedsMask) {
    const auto p = tmp("nan.npy");
    npy::save_stack(p, stack_2x2x2(1.0));
    const std::size_t shape[] = {2, 2, 2};
    std::vector<double> v(8, 1.0);
    v[3] = NAN;
    npy::write(p, npy::Dtype::f4, shape, v);
    EXPECT_THROW(npy::load_stack(p), ValidationError);
    std::vector<double> m(8, 1.0);
    m[3] = 0.0;
    npy::write(npy::mask_path(p), npy::Dtype::u1, shape, m);
    const auto s = npy::load_stack(p);
    EXPECT_FALSE(s.valid(3));
    EXPECT_TRUE(s.valid(2));
}

TEST(Npy, MalformedHeaderRejected) {
    const auto p = tmp("bad.npy");
    std::ofstream(p, std::ios::binary) << "NOTNUMPY";
    EXPECT_THROW(npy::read(p), ValidationError);
    const std::size_t shape[] = {2, 2};
    npy::write(p, npy::Dtype::f4, shape, std::vector<double>(4, 1.0));
    auto bytes = slurp(p);
    const auto pos = bytes.find("False");
    bytes.replace(pos, 5, "True ");
    std::ofstream(p, std::ios::binary) << bytes;
    EXPECT_THROW(npy::read(p), ValidationError);
}

TEST(Npy, StaticFieldIs2D) {
    const auto p = tmp("static.npy");
    const Grid g({1.0, 2.0}, {3.0, 4.0, 5.0});
    npy::save_stack(p, FieldStack::static_field(g, Image(2, 3, 7.0), Space::raw, "elevation"));
    EXPECT_EQ(npy::read(p).shape, (std::vector<std::size_t>{2, 3}));
    const auto s = npy::load_stack(p);
    EXPECT_TRUE(s.is_static());
    EXPECT_EQ(s.image(0)(1, 2), 7.0);
}

TEST(Npy, ReadsFloat64AndVersion2Headers) {
    // hand-built v2.0 file with an <f8 payload
    const std::string dict = "{'descr': '<f8', 'fortran_order': False, 'shape': (3,), }";
    std::string header = dict;
    while ((12 + header.size() + 1) % 64 != 0) header += ' ';
    header += '\n';
    std::string bytes = std::string("\x93NUMPY", 6) + char(2) + char(0);
    const std::uint32_t hl = std::uint32_t(header.size());
    for (int i = 0; i < 4; ++i) bytes += char((hl >> (8 * i)) & 0xFF);
    bytes += header;
    const double vals[3] = {1.5, -2.25, 1e-300};
    bytes.append(reinterpret_cast<const char*>(vals), sizeof vals);
    const auto p = tmp("v2.npy");
    std::ofstream(p, std::ios::binary) << bytes;
    const auto a = npy::read(p);
    EXPECT_EQ(a.dtype, npy::Dtype::f8);
    ASSERT_EQ(a.data.size(), 3u);
    EXPECT_EQ(a.data[2], 1e-300);
}
