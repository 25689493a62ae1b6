#include "stylet/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace stylet {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::uint64_t mix(std::uint64_t h, std::uint64_t x) {
    h ^= x + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    return h;
}

std::uint64_t mix_double(std::uint64_t h, double d) {
    std::uint64_t bits;
    static_assert(sizeof(bits) == sizeof(d));
    __builtin_memcpy(&bits, &d, sizeof(bits));
    return mix(h, bits);
}

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument("config: " + msg); }

}  // namespace

void Config::validate() const {
    if (model.dim == 0 || model.n_styles == 0) fail("model dimensions must be positive");
    if (model.heads == 0 || model.dim % model.heads != 0)
        fail("heads must divide dim (" + std::to_string(model.heads) + " vs " +
             std::to_string(model.dim) + ")");
    if (model.n_styles % 2 != 0) fail("n_styles must be even (two layers per resolution stage)");
    // Patch sizes are img/2, img/4, img/8; all must divide the image.
    if (model.img_size % 8 != 0) fail("img_size must be a multiple of 8 for the three-level pyramid");
    if (train.batch_size == 0) fail("batch_size must be positive");
    if (edit.xi <= 0.0) fail("xi must be positive");
    if (edit.power_iters == 0) fail("power_iters must be at least 1");
    if (model.n_attrs == 0) fail("n_attrs must be positive");
}

std::uint64_t Config::hash() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (std::uint64_t x : {seed, generator_seed, data_seed,
                            (std::uint64_t)model.n_styles, (std::uint64_t)model.dim,
                            (std::uint64_t)model.heads, (std::uint64_t)model.ffn_inner,
                            (std::uint64_t)model.embed_dim, (std::uint64_t)model.n_attrs,
                            (std::uint64_t)model.mapper_layers, (std::uint64_t)model.img_size,
                            (std::uint64_t)model.img_channels, (std::uint64_t)model.gen_channels,
                            (std::uint64_t)train.batch_size, (std::uint64_t)train.invert_steps,
                            (std::uint64_t)train.classifier_epochs, (std::uint64_t)train.editor_steps,
                            (std::uint64_t)edit.power_iters})
        h = mix(h, x);
    for (double d : {train.invert_lr, train.editor_lr, train.classifier_lr, loss.lambda_l2,
                     loss.lambda_lpips, loss.lambda_id, loss.lambda_ref, loss.lambda_keep,
                     loss.lambda_reg, edit.alpha, edit.xi})
        h = mix_double(h, d);
    return h;
}

Config config_from_text(const std::string& text) {
    Config cfg;
    std::istringstream in(text);
    std::string line, section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string s = trim(line);
        if (s.empty() || s[0] == '#' || s[0] == ';') continue;
        if (s.front() == '[' && s.back() == ']') {
            section = trim(s.substr(1, s.size() - 2));
            if (section != "seeds" && section != "model" && section != "training" &&
                section != "loss" && section != "editing" && section != "paths")
                fail("unknown section [" + section + "] at line " + std::to_string(lineno));
            continue;
        }
        std::size_t eq = s.find('=');
        if (eq == std::string::npos)
            fail("expected key = value at line " + std::to_string(lineno));
        std::string key = trim(s.substr(0, eq));
        std::string val = trim(s.substr(eq + 1));
        auto u64 = [&] { return std::stoull(val); };
        auto f64 = [&] { return std::stod(val); };
        bool known = true;
        if (section == "seeds") {
            if (key == "global") cfg.seed = u64();
            else if (key == "generator") cfg.generator_seed = u64();
            else if (key == "data") cfg.data_seed = u64();
            else known = false;
        } else if (section == "model") {
            if (key == "n_styles") cfg.model.n_styles = u64();
            else if (key == "dim") cfg.model.dim = u64();
            else if (key == "heads") cfg.model.heads = u64();
            else if (key == "ffn_inner") cfg.model.ffn_inner = u64();
            else if (key == "embed_dim") cfg.model.embed_dim = u64();
            else if (key == "n_attrs") cfg.model.n_attrs = u64();
            else if (key == "mapper_layers") cfg.model.mapper_layers = u64();
            else if (key == "img_size") cfg.model.img_size = u64();
            else if (key == "gen_channels") cfg.model.gen_channels = u64();
            else known = false;
        } else if (section == "training") {
            if (key == "batch_size") cfg.train.batch_size = u64();
            else if (key == "invert_steps") cfg.train.invert_steps = u64();
            else if (key == "classifier_epochs") cfg.train.classifier_epochs = u64();
            else if (key == "editor_steps") cfg.train.editor_steps = u64();
            else if (key == "invert_lr") cfg.train.invert_lr = f64();
            else if (key == "editor_lr") cfg.train.editor_lr = f64();
            else if (key == "classifier_lr") cfg.train.classifier_lr = f64();
            else known = false;
        } else if (section == "loss") {
            if (key == "lambda_l2") cfg.loss.lambda_l2 = f64();
            else if (key == "lambda_lpips") cfg.loss.lambda_lpips = f64();
            else if (key == "lambda_id") cfg.loss.lambda_id = f64();
            else if (key == "lambda_ref") cfg.loss.lambda_ref = f64();
            else if (key == "lambda_keep") cfg.loss.lambda_keep = f64();
            else if (key == "lambda_reg") cfg.loss.lambda_reg = f64();
            else known = false;
        } else if (section == "editing") {
            if (key == "alpha") cfg.edit.alpha = f64();
            else if (key == "xi") cfg.edit.xi = f64();
            else if (key == "power_iters") cfg.edit.power_iters = u64();
            else known = false;
        } else if (section == "paths") {
            if (key == "out_dir") cfg.out_dir = val;
            else known = false;
        } else {
            fail("key '" + key + "' outside any section at line " + std::to_string(lineno));
        }
        if (!known)
            fail("unknown key '" + key + "' in section [" + section + "] at line " +
                 std::to_string(lineno));
    }
    cfg.validate();
    return cfg;
}

Config load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) fail("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    Config cfg = config_from_text(ss.str());
    apply_env_overrides(cfg);
    cfg.validate();
    return cfg;
}

void apply_env_overrides(Config& cfg) {
    if (const char* s = std::getenv("STYLET_SEED")) cfg.seed = std::stoull(s);
    if (const char* s = std::getenv("STYLET_OUT_DIR")) cfg.out_dir = s;
}

}  // namespace stylet
