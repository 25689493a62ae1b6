#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>

#include "doctest.h"
#include "stylet/config.hpp"
#include "stylet/io.hpp"
#include "stylet/ops.hpp"
#include "stylet/optim.hpp"
#include "stylet/rng.hpp"

using namespace stylet;
namespace op = stylet::ops;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name) : path("/tmp/stylet_test_" + name) {}
    ~TempFile() { std::remove(path.c_str()); }
};

ParamList random_params(Rng& rng) {
    ParamList p;
    p.push_back({"a.w", Tensor::randn({3, 5}, rng).set_requires_grad()});
    p.push_back({"a.b", Tensor::randn({1, 5}, rng).set_requires_grad()});
    p.push_back({"b.w", Tensor::randn({4, 4}, rng).set_requires_grad()});
    return p;
}

}  // namespace

TEST_CASE("checkpoint round trip is bit-exact, including optimizer state") {
    Rng rng(61);
    ParamList params = random_params(rng);
    Adam opt(1e-3);
    // Take a couple of steps so the moment buffers are non-trivial.
    for (int s = 0; s < 3; ++s) {
        Tape tape;
        Tensor loss = Tensor::scalar(0.0);
        for (auto& [name, t] : params)
            loss = op::add(&tape, loss, op::sum_all(&tape, op::mul(&tape, t, t)));
        tape.backward(loss);
        opt.step(params);
    }

    TempFile f("ckpt.bin");
    save_checkpoint(f.path, 0xabcdef, params, &opt);
    CheckpointData ckpt = load_checkpoint(f.path);
    CHECK(ckpt.config_hash == 0xabcdef);
    REQUIRE(ckpt.tensors.size() == params.size());
    REQUIRE(ckpt.has_optimizer);
    CHECK(ckpt.opt_t == opt.t());

    ParamList fresh = random_params(rng);
    restore_params(ckpt, fresh, 0xabcdef);
    for (std::size_t i = 0; i < params.size(); ++i)
        for (std::size_t e = 0; e < params[i].tensor.numel(); ++e)
            CHECK(fresh[i].tensor.values()[e] == params[i].tensor.values()[e]);

    // Round trip again: the two files are byte-identical.
    TempFile f2("ckpt2.bin");
    save_checkpoint(f2.path, 0xabcdef, fresh, nullptr);
    TempFile f3("ckpt3.bin");
    save_checkpoint(f3.path, 0xabcdef, params, nullptr);
    std::ifstream s2(f2.path, std::ios::binary), s3(f3.path, std::ios::binary);
    std::string b2((std::istreambuf_iterator<char>(s2)), std::istreambuf_iterator<char>());
    std::string b3((std::istreambuf_iterator<char>(s3)), std::istreambuf_iterator<char>());
    CHECK(b2 == b3);
}

TEST_CASE("checkpoint restore guards hash, names, and shapes") {
    Rng rng(62);
    ParamList params = random_params(rng);
    TempFile f("ckpt_guard.bin");
    save_checkpoint(f.path, 111, params);
    CheckpointData ckpt = load_checkpoint(f.path);

    ParamList other = random_params(rng);
    CHECK_THROWS_WITH_AS(restore_params(ckpt, other, 222),
                         doctest::Contains("--force"), std::runtime_error);
    CHECK_NOTHROW(restore_params(ckpt, other, 222, /*force=*/true));

    ParamList renamed = random_params(rng);
    renamed[0].name = "missing.w";
    CHECK_THROWS_AS(restore_params(ckpt, renamed, 111), std::runtime_error);

    ParamList reshaped = random_params(rng);
    reshaped[0].tensor = Tensor::randn({5, 3}, rng);
    CHECK_THROWS_AS(restore_params(ckpt, reshaped, 111), std::runtime_error);

    CHECK_THROWS_AS(load_checkpoint("/tmp/stylet_test_does_not_exist.bin"), std::runtime_error);
}

TEST_CASE("corrupted magic is rejected") {
    TempFile f("bad_magic.bin");
    std::ofstream out(f.path, std::ios::binary);
    out << "NOTMAGIC junk";
    out.close();
    CHECK_THROWS_AS(load_checkpoint(f.path), std::runtime_error);
    CHECK_THROWS_AS(load_codes(f.path), std::runtime_error);
    CHECK_THROWS_AS(load_images(f.path), std::runtime_error);
}

TEST_CASE("code files round trip codes and labels bit-exactly") {
    Rng rng(63);
    CodeFile cf;
    cf.n = 4;
    cf.d = 8;
    for (int i = 0; i < 5; ++i) {
        cf.codes.push_back(Tensor::randn({4, 8}, rng));
        cf.labels.push_back({i % 2, 1 - i % 2, 1});
    }
    TempFile f("codes.bin");
    save_codes(f.path, cf);
    CodeFile back = load_codes(f.path);
    CHECK(back.n == 4);
    CHECK(back.d == 8);
    REQUIRE(back.codes.size() == 5);
    REQUIRE(back.labels.size() == 5);
    for (int i = 0; i < 5; ++i) {
        for (std::size_t e = 0; e < cf.codes[i].numel(); ++e)
            CHECK(back.codes[i].values()[e] == cf.codes[i].values()[e]);
        CHECK(back.labels[i] == cf.labels[i]);
    }
}

TEST_CASE("image files round trip bit-exactly") {
    Rng rng(64);
    ImageFile imf;
    imf.h = 4;
    imf.w = 4;
    imf.c = 3;
    for (int i = 0; i < 3; ++i) imf.images.push_back(Tensor::randn({16, 3}, rng));
    TempFile f("imgs.bin");
    save_images(f.path, imf);
    ImageFile back = load_images(f.path);
    CHECK(back.h == 4);
    CHECK(back.w == 4);
    CHECK(back.c == 3);
    REQUIRE(back.images.size() == 3);
    for (int i = 0; i < 3; ++i)
        for (std::size_t e = 0; e < 48; ++e)
            CHECK(back.images[i].values()[e] == imf.images[i].values()[e]);
}

TEST_CASE("csv writer emits header plus full-precision rows") {
    TempFile f("out.csv");
    write_csv(f.path, {"step", "loss"}, {{0.0, 0.125}, {1.0, 1.0 / 3.0}});
    std::ifstream in(f.path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "step,loss");
    std::getline(in, line);
    CHECK(line == "0,0.125");
    std::getline(in, line);
    CHECK(line.substr(0, 2) == "1,");
    CHECK(line.find("0.333333333333333") != std::string::npos);
}

TEST_CASE("config parsing applies sections and rejects unknown keys") {
    Config cfg = config_from_text(
        "[model]\n"
        "n_styles = 4\n"
        "dim = 32\n"
        "heads = 2\n"
        "\n"
        "# comment line\n"
        "[training]\n"
        "invert_lr = 0.01\n"
        "[seeds]\n"
        "global = 99\n");
    CHECK(cfg.model.n_styles == 4);
    CHECK(cfg.model.dim == 32);
    CHECK(cfg.model.heads == 2);
    CHECK(cfg.train.invert_lr == 0.01);
    CHECK(cfg.seed == 99);

    CHECK_THROWS_WITH_AS(config_from_text("[model]\nnot_a_key = 1\n"),
                         doctest::Contains("not_a_key"), std::invalid_argument);
    CHECK_THROWS_AS(config_from_text("[nope]\n"), std::invalid_argument);
    CHECK_THROWS_AS(config_from_text("stray = 1\n"), std::invalid_argument);
}

TEST_CASE("config validation enforces structural constraints") {
    Config cfg;
    cfg.model.heads = 3;  // does not divide dim = 64
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.model.heads = 4;
    cfg.model.n_styles = 5;  // odd
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.model.n_styles = 8;
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("config hash tracks every field that shapes the model") {
    Config a, b;
    CHECK(a.hash() == b.hash());
    b.model.dim = 32;
    CHECK(a.hash() != b.hash());
    Config c;
    c.seed = 1234;
    CHECK(a.hash() != c.hash());
}

TEST_CASE("environment overrides replace seed and output directory") {
    Config cfg;
    setenv("STYLET_SEED", "4242", 1);
    setenv("STYLET_OUT_DIR", "/tmp/stylet_out", 1);
    apply_env_overrides(cfg);
    CHECK(cfg.seed == 4242);
    CHECK(cfg.out_dir == "/tmp/stylet_out");
    unsetenv("STYLET_SEED");
    unsetenv("STYLET_OUT_DIR");

    setenv("STYLET_SEED", "not_a_number", 1);
    CHECK_THROWS_AS(apply_env_overrides(cfg), std::invalid_argument);
    unsetenv("STYLET_SEED");
}
