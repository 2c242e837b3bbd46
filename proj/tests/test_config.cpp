#include <filesystem>
#include <set>

#include <gtest/gtest.h>

#include "epcgaze/config.hpp"
#include "epcgaze/errors.hpp"

using namespace epcgaze;

TEST(Config, DefaultsMatchReferenceHyperparameters) {
    const RunConfig c;
    EXPECT_EQ(c.train.neighbor.k, 4u);
    EXPECT_DOUBLE_EQ(c.train.neighbor.mu, 0.15);
    EXPECT_EQ(c.model.embedding_dim, 16u);
    EXPECT_EQ(c.train.source_batch, 64u);
    EXPECT_EQ(c.train.target_batch, 64u);
    EXPECT_DOUBLE_EQ(c.train.learning_rate, 0.001);
    EXPECT_DOUBLE_EQ(c.train.momentum, 0.9);
    EXPECT_DOUBLE_EQ(c.train.weight_decay, 5e-4);
    EXPECT_EQ(c.train.pretrain_epochs, 5u);
    EXPECT_DOUBLE_EQ(c.train.loss.lambda_epc, 1.0);
    EXPECT_DOUBLE_EQ(c.train.loss.lambda_gaze, 1.0);
    EXPECT_EQ(c.generator.n_subjects, 10u);
}

TEST(Config, KeysAreUniqueAndFlagsAreKebabCase) {
    std::set<std::string> keys;
    for (const ConfigField& f : config_fields()) EXPECT_TRUE(keys.insert(f.key).second) << f.key;
    EXPECT_EQ(flag_name("pretrain_epochs"), "pretrain-epochs");
    EXPECT_EQ(flag_name("mu"), "mu");
}

TEST(Config, SnapshotRoundTripsEveryField) {
    RunConfig c;
    set_field(c, "mu", "0.05");
    set_field(c, "hidden_layers", "32, 8");
    set_field(c, "activation", "tanh");
    set_field(c, "lambda_reg", "1e-4");
    set_field(c, "learning_rate", "0.1234567890123456789");
    set_field(c, "da_target", "prediction");
    set_field(c, "identical_subjects", "true");
    set_field(c, "seed", "18446744073709551615");
    set_field(c, "ablate_values", "3,5");
    c.finalize();
    const std::string text = config_to_text(c);
    RunConfig back;
    apply_config_text(back, text);
    back.finalize();
    EXPECT_EQ(config_to_text(back), text);
    EXPECT_EQ(back.train.learning_rate, c.train.learning_rate);
    EXPECT_EQ(back.model.hidden_layers, (std::vector<std::size_t>{32, 8}));
    EXPECT_EQ(back.seed, 18446744073709551615ull);
    EXPECT_EQ(*back.train.neighbor.lambda_reg, 1e-4);
    for (const ConfigField& f : config_fields()) EXPECT_EQ(get_field(back, f.key), get_field(c, f.key)) << f.key;
}

TEST(Config, UnknownKeysAreErrors) {
    RunConfig c;
    EXPECT_THROW(apply_config_text(c, "[neighbor]\nmu = 0.1\nradius = 2\n"), ConfigError);
    EXPECT_THROW(set_field(c, "radius", "2"), ConfigError);
}

TEST(Config, KeysMustSitInTheirSection) {
    RunConfig c;
    try {
        apply_config_text(c, "[model]\nmu = 0.1\n", "run.ini");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("run.ini:2"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("[neighbor]"), std::string::npos);
    }
}

TEST(Config, MalformedInputIsRejected) {
    RunConfig c;
    EXPECT_THROW(apply_config_text(c, "[neighbor\nk = 4\n"), ConfigError);
    EXPECT_THROW(apply_config_text(c, "[neighbor]\nk 4\n"), ConfigError);
    EXPECT_THROW(apply_config_text(c, "[neighbor]\nk = four\n"), ConfigError);
    EXPECT_THROW(apply_config_text(c, "[neighbor]\nk = 4\nk = 5\n"), ConfigError);
    EXPECT_THROW(apply_config_text(c, "[neighbor]\nk = -4\n"), ConfigError);
    EXPECT_THROW(apply_config_text(c, "[model]\nactivation = gelu\n"), ConfigError);
}

TEST(Config, CommentsAndBlankLinesAreIgnored) {
    RunConfig c;
    apply_config_text(c, "# comment\n\n; other\n[neighbor]\n  k = 6  \n");
    EXPECT_EQ(c.train.neighbor.k, 6u);
}

TEST(Config, FlagsOverrideFileOverrideDefaults) {
    RunConfig c;
    apply_config_text(c, "[neighbor]\nk = 6\nmu = 0.2\n");
    set_field(c, "mu", "0.3");
    EXPECT_EQ(c.train.neighbor.k, 6u);
    EXPECT_DOUBLE_EQ(c.train.neighbor.mu, 0.3);
    EXPECT_EQ(c.train.neighbor.lambda_reg, std::nullopt);
}

TEST(Config, FinalizeSharesInputDimAndSeed) {
    RunConfig c;
    set_field(c, "input_dim", "9");
    set_field(c, "seed", "77");
    c.finalize();
    EXPECT_EQ(c.generator.input_dim, 9u);
    EXPECT_EQ(c.train.seed, 77u);
    EXPECT_EQ(c.experiment().train.seed, 77u);
    set_field(c, "ablate_axis", "depth");
    EXPECT_THROW(c.finalize(), ConfigError);
}

TEST(Config, FileHelpers) {
    const auto path = std::filesystem::temp_directory_path() / "epcgaze_config_test.ini";
    RunConfig c;
    set_field(c, "k", "3");
    write_config_snapshot(path, c);
    RunConfig back;
    apply_config_file(back, path);
    EXPECT_EQ(back.train.neighbor.k, 3u);
    std::filesystem::remove(path);
    EXPECT_THROW(apply_config_file(back, path), IoError);
}
