#include <gtest/gtest.h>

#include <sstream>

#include "downscale/config.hpp"

using namespace downscale;

namespace {

config::KeyValues parse(const std::string& text) {
    std::istringstream in(text);
    return config::parse(in);
}

}  // namespace

TEST(Config, ParsesCommentsAndQuotes) {
    const auto kv = parse("# header\nkind = ridge_patch  # trailing\n\nt_lag=3\ncommand = \"run # me\"\n");
    EXPECT_EQ(kv.at("kind"), "ridge_patch");
    EXPECT_EQ(kv.at("t_lag"), "3");
    EXPECT_EQ(kv.at("command"), "run # me");
    const auto s = config::spec_from_config(kv);
    EXPECT_EQ(s.kind, predictor::Kind::ridge_patch);
    EXPECT_EQ(s.t_lag, 3);
    EXPECT_EQ(s.command, "run # me");
    EXPECT_FALSE(s.clamp.has_value());
}

TEST(Config, RejectsUnknownDuplicateAndMalformed) {
    EXPECT_THROW(parse("t_lag = 2\nlearning_rate = 1\n"), ValidationError);
    EXPECT_THROW(parse("t_lag = 2\nt_lag = 3\n"), ValidationError);
    EXPECT_THROW(parse("t_lag 2\n"), ValidationError);
}

TEST(Config, SpecValidation) {
    EXPECT_THROW(config::spec_from_config(parse("kind = persistence\n")), ValidationError);
    EXPECT_THROW(config::spec_from_config(parse("t_lag = two\n")), ValidationError);
    EXPECT_THROW(config::spec_from_config(parse("t_lag = 0\n")), ValidationError);
    EXPECT_THROW(config::spec_from_config(parse("t_lag = 2\nlambda = -1\n")), ValidationError);
    EXPECT_THROW(config::spec_from_config(parse("t_lag = 2\nclamp_lo = -1\n")), ValidationError);
    EXPECT_THROW(config::spec_from_config(parse("t_lag = 2\nclamp_lo = 1\nclamp_hi = 0\n")), ValidationError);
    EXPECT_THROW(config::spec_from_config(parse("t_lag = 2\nclamp_lo = 0\nclamp_hi = 1\nclamp_knee = 0.5\n")), ValidationError);
    EXPECT_THROW(config::spec_from_config(parse("t_lag = 2\nkind = external\n")), ValidationError);
    EXPECT_THROW(config::spec_from_config(parse("t_lag = 2\nstride = 17\n")), ValidationError);
    EXPECT_THROW(config::spec_from_config(parse("t_lag = 2\nkind = unet\n")), ValidationError);
}

TEST(Config, AllKeysApplied) {
    const auto s = config::spec_from_config(
        parse("kind = external\nt_lag = 4\nlambda = 0.5\nhalo = 1\nstride = 4\ntrain_stride = 16\neps = 1e-6\n"
              "clamp_lo = -3\nclamp_hi = 2\nclamp_knee = 0.2\ncommand = ./p\nexchange_dir = /tmp/x\nseed = 9\n"));
    EXPECT_EQ(s.t_lag, 4);
    EXPECT_EQ(s.lambda, 0.5);
    EXPECT_EQ(s.halo, 1);
    EXPECT_EQ(s.stride, 4);
    EXPECT_EQ(s.train_stride, 16);
    EXPECT_EQ(s.eps, 1e-6);
    ASSERT_TRUE(s.clamp.has_value());
    EXPECT_EQ(s.clamp->lo, -3);
    EXPECT_EQ(s.clamp->knee, 0.2);
    EXPECT_EQ(s.exchange_dir, "/tmp/x");
    EXPECT_EQ(config::seed_from_config(parse("seed = 9\n")), 9u);
    EXPECT_EQ(config::seed_from_config(parse(""), 4), 4u);
}
