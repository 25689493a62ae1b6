#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "stylet/classifier.hpp"
#include "stylet/config.hpp"
#include "stylet/editing.hpp"
#include "stylet/encoder.hpp"
#include "stylet/generator.hpp"
#include "stylet/harness.hpp"
#include "stylet/io.hpp"
#include "stylet/metrics.hpp"
#include "stylet/ops.hpp"

namespace fs = std::filesystem;
using namespace stylet;

namespace {

Config load_cfg(const std::string& path) {
    Config cfg = path.empty() ? Config{} : load_config(path);
    apply_env_overrides(cfg);
    cfg.validate();
    return cfg;
}

LatentDataset dataset_from_codes(const CodeFile& cf) {
    LatentDataset ds;
    ds.codes = cf.codes;
    ds.labels = cf.labels;
    return ds;
}

CodeFile codes_from(const std::vector<Tensor>& codes, std::size_t n, std::size_t d) {
    CodeFile cf;
    cf.n = n;
    cf.d = d;
    cf.codes = codes;
    return cf;
}

LatentClassifier restore_classifier(const Config& cfg, const std::string& ckpt_path, bool force) {
    LatentClassifier clf(cfg.model, cfg.seed);
    ParamList params = clf.params();
    restore_params(load_checkpoint(ckpt_path), params, cfg.hash(), force);
    return clf;
}

int cmd_gen_data(const Config& cfg, std::size_t count, const std::string& codes_out,
                 const std::string& images_out, const std::string& csv_out) {
    ToyGenerator gen(cfg.model, cfg.generator_seed);
    LatentDataset ds = sample_latent_dataset(gen, cfg.model, count, cfg.data_seed);
    CodeFile cf = codes_from(ds.codes, cfg.model.n_styles, cfg.model.dim);
    cf.labels = ds.labels;
    save_codes(codes_out, cf);
    if (!images_out.empty()) {
        ImageFile imf;
        imf.h = cfg.model.img_size;
        imf.w = cfg.model.img_size;
        imf.c = cfg.model.img_channels;
        imf.images = ds.images;
        save_images(images_out, imf);
    }
    std::vector<std::vector<double>> rows;
    for (std::size_t k = 0; k < cfg.model.n_attrs; ++k) {
        double pos = 0;
        for (const auto& l : ds.labels) pos += l[k];
        rows.push_back({double(k), pos / double(count), ds.thresholds[k]});
    }
    if (!csv_out.empty()) write_csv(csv_out, {"attribute", "positive_rate", "threshold"}, rows);
    std::printf("gen-data: %zu codes (N=%zu D=%zu), generator checksum %016llx\n", count,
                cfg.model.n_styles, cfg.model.dim, (unsigned long long)gen.checksum());
    return 0;
}

int cmd_train_classifier(const Config& cfg, const std::string& codes_in,
                         const std::string& ckpt_out, const std::string& csv_out) {
    CodeFile cf = load_codes(codes_in);
    if (cf.labels.empty()) throw std::runtime_error("train-classifier: code file has no labels");
    LatentDataset ds = dataset_from_codes(cf);
    LatentClassifier clf(cfg.model, cfg.seed);
    TrainCurve curve = train_classifier(clf, ds, cfg.train.classifier_epochs,
                                        cfg.train.classifier_lr, cfg.train.batch_size);
    ParamList params = clf.params();
    save_checkpoint(ckpt_out, cfg.hash(), params);
    std::vector<std::vector<double>> rows;
    for (std::size_t e = 0; e < curve.loss_per_epoch.size(); ++e)
        rows.push_back({double(e), curve.loss_per_epoch[e]});
    if (!csv_out.empty()) write_csv(csv_out, {"epoch", "loss"}, rows);
    std::printf("train-classifier: %zu epochs, loss %.6f -> %.6f, checkpoint %s\n",
                curve.loss_per_epoch.size() - 1, curve.loss_per_epoch.front(),
                curve.loss_per_epoch.back(), ckpt_out.c_str());
    return 0;
}

int cmd_train_invert(const Config& cfg, const std::string& images_in, const std::string& ckpt_out,
                     const std::string& csv_out, std::size_t steps, bool no_self) {
    ImageFile imf = load_images(images_in);
    ToyGenerator gen(cfg.model, cfg.generator_seed);
    SurrogateNets sur(cfg.model, cfg.seed);
    StyleEncoder enc(cfg.model, cfg.seed);
    std::uint64_t gen_sum = gen.checksum();
    Adam opt(cfg.train.invert_lr);
    InversionTrainResult r =
        train_inversion(enc, gen, sur, imf.images, cfg, steps, !no_self, &opt);
    if (gen.checksum() != gen_sum)
        throw std::runtime_error("train-invert: generator checksum changed");
    ParamList params = enc.params();
    save_checkpoint(ckpt_out, cfg.hash(), params, &opt);
    std::vector<std::vector<double>> rows;
    for (std::size_t s = 0; s < r.loss_curve.size(); ++s)
        rows.push_back({double(s), r.loss_curve[s]});
    if (!csv_out.empty()) write_csv(csv_out, {"step", "total_loss"}, rows);
    std::printf("train-invert: %zu steps over %zu images%s, loss %.6f -> %.6f\n",
                r.loss_curve.size(), imf.images.size(), no_self ? " (no-self)" : "",
                r.loss_curve.front(), r.loss_curve.back());
    return 0;
}

int cmd_invert(const Config& cfg, const std::string& images_in, const std::string& ckpt_in,
               const std::string& codes_out, const std::string& csv_out, bool no_self,
               bool force) {
    ImageFile imf = load_images(images_in);
    ToyGenerator gen(cfg.model, cfg.generator_seed);
    StyleEncoder enc(cfg.model, cfg.seed);
    ParamList params = enc.params();
    restore_params(load_checkpoint(ckpt_in), params, cfg.hash(), force);
    std::vector<Tensor> codes;
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < imf.images.size(); ++i) {
        Tensor w = enc.invert(nullptr, imf.images[i], !no_self);
        codes.push_back(w);
        rows.push_back({double(i), mse(imf.images[i], gen.synthesize(nullptr, w))});
    }
    save_codes(codes_out, codes_from(codes, cfg.model.n_styles, cfg.model.dim));
    if (!csv_out.empty()) write_csv(csv_out, {"image", "recon_mse"}, rows);
    double total = 0;
    for (const auto& r : rows) total += r[1];
    std::printf("invert: %zu images, mean reconstruction MSE %.6f\n", imf.images.size(),
                total / double(rows.size()));
    return 0;
}

int cmd_edit_label(const Config& cfg, const std::string& codes_in, const std::string& clf_ckpt,
                   const std::string& codes_out, const std::string& csv_out, std::size_t attribute,
                   double target, int order, double alpha, double xi, std::size_t iters,
                   bool force) {
    CodeFile cf = load_codes(codes_in);
    LatentClassifier clf = restore_classifier(cfg, clf_ckpt, force);
    std::uint64_t clf_sum = clf.checksum();
    std::vector<Tensor> edited;
    std::vector<std::vector<double>> rows;
    Rng rng = Rng::stream(cfg.seed, "edit.label");
    for (std::size_t i = 0; i < cf.codes.size(); ++i) {
        const Tensor& w = cf.codes[i];
        EditDirection dir =
            order == 1 ? first_order_direction(w, attribute, target, clf, alpha)
                       : second_order_direction(w, attribute, target, clf, xi, iters, rng, alpha);
        Tensor we = apply_edit(w, dir);
        edited.push_back(we);
        ScalarLossFn loss = target_bce(clf, attribute, target);
        rows.push_back({double(i), loss(nullptr, w).item(), loss(nullptr, we).item()});
    }
    if (clf.checksum() != clf_sum)
        throw std::runtime_error("edit-label: classifier checksum changed");
    save_codes(codes_out, codes_from(edited, cf.n, cf.d));
    if (!csv_out.empty()) write_csv(csv_out, {"code", "bce_before", "bce_after"}, rows);
    double improved = 0;
    for (const auto& r : rows) improved += (r[2] < r[1]) ? 1.0 : 0.0;
    std::printf("edit-label: order %d, attribute %zu -> %.1f, alpha %g; BCE decreased on %.0f%% of "
                "%zu codes\n",
                order, attribute, target, alpha, 100.0 * improved / double(rows.size()),
                rows.size());
    return 0;
}

int cmd_train_editor(const Config& cfg, const std::string& sources_in, const std::string& refs_in,
                     const std::string& clf_ckpt, const std::string& ckpt_out,
                     const std::string& csv_out, std::size_t attribute, bool force) {
    CodeFile src = load_codes(sources_in);
    CodeFile ref = load_codes(refs_in);
    LatentClassifier clf = restore_classifier(cfg, clf_ckpt, force);
    EditorTrainResult r =
        train_reference_editor(src.codes, ref.codes, attribute, clf, cfg.loss,
                               cfg.train.editor_steps, cfg.train.editor_lr, cfg.seed);
    ParamList params = r.editor.params("editor");
    save_checkpoint(ckpt_out, cfg.hash(), params);
    std::vector<std::vector<double>> rows;
    for (std::size_t s = 0; s < r.loss_curve.size(); ++s)
        rows.push_back({double(s), r.loss_curve[s]});
    if (!csv_out.empty()) write_csv(csv_out, {"step", "total_loss"}, rows);
    std::printf("train-editor: attribute %zu, %zu steps, validation loss %.6f -> %.6f\n",
                attribute, r.loss_curve.size(), r.validation_start, r.validation_end);
    return 0;
}

int cmd_edit_ref(const Config& cfg, const std::string& sources_in, const std::string& refs_in,
                 const std::string& editor_ckpt, const std::string& codes_out,
                 const std::string& csv_out, bool force) {
    CodeFile src = load_codes(sources_in);
    CodeFile ref = load_codes(refs_in);
    if (src.codes.size() != ref.codes.size())
        throw std::runtime_error("edit-ref: source and reference counts differ");
    Rng init_rng = Rng::stream(cfg.seed, "editor");
    RefEditorParams editor = RefEditorParams::init(cfg.model.dim, init_rng);
    ParamList params = editor.params("editor");
    restore_params(load_checkpoint(editor_ckpt), params, cfg.hash(), force);
    std::vector<Tensor> edited;
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < src.codes.size(); ++i) {
        ReferenceEditResult res = reference_edit(nullptr, src.codes[i], ref.codes[i], editor);
        edited.push_back(res.edited);
        double dn = 0;
        for (double x : res.delta_w.values()) dn += x * x;
        rows.push_back({double(i), std::sqrt(dn)});
    }
    save_codes(codes_out, codes_from(edited, src.n, src.d));
    if (!csv_out.empty()) write_csv(csv_out, {"pair", "delta_norm"}, rows);
    std::printf("edit-ref: %zu pairs edited\n", edited.size());
    return 0;
}

int cmd_metrics_mse(const std::string& a_in, const std::string& b_in, const std::string& csv_out) {
    ImageFile a = load_images(a_in), b = load_images(b_in);
    if (a.images.size() != b.images.size())
        throw std::runtime_error("metrics mse: image counts differ");
    std::vector<std::vector<double>> rows;
    double total = 0;
    for (std::size_t i = 0; i < a.images.size(); ++i) {
        double v = mse(a.images[i], b.images[i]);
        rows.push_back({double(i), v});
        total += v;
    }
    if (!csv_out.empty()) write_csv(csv_out, {"image", "mse"}, rows);
    std::printf("mse: mean %.8f over %zu images\n", total / double(a.images.size()),
                a.images.size());
    return 0;
}

std::vector<std::vector<double>> flatten_codes(const CodeFile& cf) {
    std::vector<std::vector<double>> out;
    for (const Tensor& c : cf.codes) out.push_back(c.values());
    return out;
}

int cmd_metrics_swd(const std::string& a_in, const std::string& b_in, std::size_t projections,
                    std::uint64_t seed, const std::string& csv_out) {
    CodeFile a = load_codes(a_in), b = load_codes(b_in);
    double v = swd(flatten_codes(a), flatten_codes(b), projections, seed);
    if (!csv_out.empty()) write_csv(csv_out, {"projections", "swd"}, {{double(projections), v}});
    std::printf("swd: %.8f (%zu projections)\n", v, projections);
    return 0;
}

int cmd_metrics_ad(const Config& cfg, const std::string& codes_in, const std::string& data_in,
                   const std::string& clf_ckpt, std::size_t attribute, double target,
                   const std::vector<double>& steps, bool rescore_only, double alpha,
                   const std::string& csv_out, bool force) {
    CodeFile cf = load_codes(codes_in);
    CodeFile data = load_codes(data_in);
    if (data.labels.empty()) throw std::runtime_error("metrics: data file has no labels");
    ToyGenerator gen(cfg.model, cfg.generator_seed);
    LatentDataset ds = dataset_from_codes(data);
    for (const Tensor& c : ds.codes) ds.images.push_back(gen.synthesize(nullptr, c));
    ImageProbes probes(gen, ds);
    AttributeEvaluator eval = probes.evaluator(gen);
    LatentClassifier clf = restore_classifier(cfg, clf_ckpt, force);
    EditFn editor = [&](const Tensor& w, double a) {
        EditDirection dir = first_order_direction(w, attribute, target, clf, a);
        return apply_edit(w, dir);
    };
    if (rescore_only) {
        std::vector<double> delta = rescoring(cf.codes, editor, alpha, eval);
        std::vector<std::vector<double>> rows;
        for (std::size_t k = 0; k < delta.size(); ++k) rows.push_back({double(k), delta[k]});
        if (!csv_out.empty()) write_csv(csv_out, {"attribute", "mean_logit_change"}, rows);
        std::printf("rescoring: attribute %zu edited at alpha %g over %zu codes\n", attribute,
                    alpha, cf.codes.size());
        return 0;
    }
    std::vector<double> sigma = logit_sigmas(eval, ds.codes);
    ADReport rep = mean_ad(cf.codes, attribute, steps, editor, eval, sigma);
    std::vector<std::vector<double>> rows;
    for (std::size_t s = 0; s < rep.steps.size(); ++s)
        rows.push_back({rep.steps[s], rep.target_change[s], rep.mean_ad[s]});
    if (!csv_out.empty()) write_csv(csv_out, {"alpha", "target_change", "mean_ad"}, rows);
    std::printf("mean-ad: attribute %zu, %zu steps, max mean-AD %.6f\n", attribute,
                rep.steps.size(),
                rep.mean_ad.empty() ? 0.0 : *std::max_element(rep.mean_ad.begin(),
                                                              rep.mean_ad.end()));
    return 0;
}

int cmd_inspect(const std::string& ckpt_in, const std::string& csv_out) {
    CheckpointData ckpt = load_checkpoint(ckpt_in);
    std::printf("checkpoint: version %u, config hash %016llx, %zu tensors, optimizer %s\n",
                ckpt.version, (unsigned long long)ckpt.config_hash, ckpt.tensors.size(),
                ckpt.has_optimizer ? "present" : "absent");
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < ckpt.tensors.size(); ++i) {
        const Tensor& t = ckpt.tensors[i].tensor;
        double mn = t.values()[0], mx = t.values()[0];
        for (double x : t.values()) {
            mn = std::min(mn, x);
            mx = std::max(mx, x);
        }
        std::printf("  %-40s [%zux%zu] min %.4g max %.4g\n", ckpt.tensors[i].name.c_str(),
                    t.rows(), t.cols(), mn, mx);
        rows.push_back({double(i), double(t.rows()), double(t.cols()), mn, mx});
    }
    if (!csv_out.empty()) write_csv(csv_out, {"index", "rows", "cols", "min", "max"}, rows);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"style-code inversion and editing toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_csv;
    app.add_option("--config", config_path, "config file (key = value sections)");

    // gen-data
    auto* gen_data = app.add_subcommand("gen-data", "sample codes, labels, and rendered images");
    std::size_t gd_count = 64;
    std::string gd_codes = "codes.bin", gd_images = "images.bin";
    gen_data->add_option("--count", gd_count);
    gen_data->add_option("--codes", gd_codes, "output code file");
    gen_data->add_option("--images", gd_images, "output image file ('' to skip)");
    gen_data->add_option("--out", out_csv, "summary CSV");

    // train-classifier
    auto* tc = app.add_subcommand("train-classifier", "fit the latent attribute classifier");
    std::string tc_codes, tc_ckpt = "classifier.ckpt";
    tc->add_option("--codes", tc_codes)->required();
    tc->add_option("--ckpt", tc_ckpt);
    tc->add_option("--out", out_csv, "loss curve CSV");

    // train-invert
    auto* ti = app.add_subcommand("train-invert", "train the inversion encoder");
    std::string ti_images, ti_ckpt = "encoder.ckpt";
    std::size_t ti_steps = 0;
    bool ti_noself = false;
    ti->add_option("--images", ti_images)->required();
    ti->add_option("--ckpt", ti_ckpt);
    ti->add_option("--steps", ti_steps, "override config step budget");
    ti->add_flag("--no-self", ti_noself, "ablate the self-attention sublayer");
    ti->add_option("--out", out_csv, "loss curve CSV");

    // invert
    auto* inv = app.add_subcommand("invert", "invert images to style codes");
    std::string inv_images, inv_ckpt, inv_codes = "inverted.bin";
    bool inv_noself = false, inv_force = false;
    inv->add_option("--images", inv_images)->required();
    inv->add_option("--ckpt", inv_ckpt)->required();
    inv->add_option("--codes", inv_codes, "output code file");
    inv->add_flag("--no-self", inv_noself);
    inv->add_flag("--force", inv_force, "ignore config-hash mismatch");
    inv->add_option("--out", out_csv, "per-image reconstruction CSV");

    // edit-label
    auto* el = app.add_subcommand("edit-label", "label-based editing via classifier gradients");
    std::string el_codes, el_clf, el_out_codes = "edited.bin";
    std::size_t el_attr = 0, el_iters = 0;
    double el_target = 1.0, el_alpha = -1.0, el_xi = 0.0;
    int el_order = 1;
    bool el_force = false;
    el->add_option("--codes", el_codes)->required();
    el->add_option("--classifier", el_clf)->required();
    el->add_option("--attribute", el_attr);
    el->add_option("--target", el_target);
    el->add_option("--order", el_order)->check(CLI::IsMember({1, 2}));
    el->add_option("--alpha", el_alpha);
    el->add_option("--xi", el_xi);
    el->add_option("--iters", el_iters, "power iterations (order 2)");
    el->add_option("--edited", el_out_codes, "output code file");
    el->add_flag("--force", el_force);
    el->add_option("--out", out_csv, "per-code BCE CSV");

    // train-editor
    auto* te = app.add_subcommand("train-editor", "train the reference-based editor");
    std::string te_src, te_ref, te_clf, te_ckpt = "editor.ckpt";
    std::size_t te_attr = 0;
    bool te_force = false;
    te->add_option("--sources", te_src)->required();
    te->add_option("--refs", te_ref)->required();
    te->add_option("--classifier", te_clf)->required();
    te->add_option("--attribute", te_attr);
    te->add_option("--ckpt", te_ckpt);
    te->add_flag("--force", te_force);
    te->add_option("--out", out_csv, "loss curve CSV");

    // edit-ref
    auto* er = app.add_subcommand("edit-ref", "apply a trained reference editor");
    std::string er_src, er_ref, er_ckpt, er_out_codes = "ref_edited.bin";
    bool er_force = false;
    er->add_option("--sources", er_src)->required();
    er->add_option("--refs", er_ref)->required();
    er->add_option("--editor", er_ckpt)->required();
    er->add_option("--edited", er_out_codes, "output code file");
    er->add_flag("--force", er_force);
    er->add_option("--out", out_csv, "per-pair delta CSV");

    // metrics
    auto* me = app.add_subcommand("metrics", "evaluation metrics");
    std::string me_kind, me_a, me_b, me_codes, me_data, me_clf;
    std::size_t me_proj = 128, me_attr = 0;
    std::uint64_t me_seed = 5;
    double me_alpha = 0.5, me_target = 1.0;
    std::vector<double> me_steps = {0.25, 0.5, 1.0};
    bool me_force = false;
    me->add_option("kind", me_kind)->required()->check(
        CLI::IsMember({"mse", "swd", "mean-ad", "rescoring"}));
    me->add_option("--a", me_a, "first image/code file");
    me->add_option("--b", me_b, "second image/code file");
    me->add_option("--codes", me_codes, "codes to edit (mean-ad, rescoring)");
    me->add_option("--data", me_data, "labeled code file for probe training");
    me->add_option("--classifier", me_clf, "classifier checkpoint (edit direction)");
    me->add_option("--attribute", me_attr);
    me->add_option("--target", me_target);
    me->add_option("--alpha", me_alpha, "step size (rescoring)");
    me->add_option("--steps", me_steps, "step sizes (mean-ad)");
    me->add_option("--projections", me_proj);
    me->add_option("--seed", me_seed, "projection seed");
    me->add_flag("--force", me_force);
    me->add_option("--out", out_csv, "results CSV");

    // inspect-checkpoint
    auto* ins = app.add_subcommand("inspect-checkpoint", "list checkpoint contents");
    std::string ins_ckpt;
    ins->add_option("--ckpt", ins_ckpt)->required();
    ins->add_option("--out", out_csv, "tensor table CSV");

    CLI11_PARSE(app, argc, argv);

    try {
        Config cfg = load_cfg(config_path);
        if (*gen_data)
            return cmd_gen_data(cfg, gd_count, gd_codes, gd_images, out_csv);
        if (*tc) return cmd_train_classifier(cfg, tc_codes, tc_ckpt, out_csv);
        if (*ti)
            return cmd_train_invert(cfg, ti_images, ti_ckpt, out_csv,
                                    ti_steps ? ti_steps : cfg.train.invert_steps, ti_noself);
        if (*inv)
            return cmd_invert(cfg, inv_images, inv_ckpt, inv_codes, out_csv, inv_noself,
                              inv_force);
        if (*el)
            return cmd_edit_label(cfg, el_codes, el_clf, el_out_codes, out_csv, el_attr,
                                  el_target, el_order,
                                  el_alpha < 0 ? cfg.edit.alpha : el_alpha,
                                  el_xi > 0 ? el_xi : cfg.edit.xi,
                                  el_iters ? el_iters : cfg.edit.power_iters, el_force);
        if (*te)
            return cmd_train_editor(cfg, te_src, te_ref, te_clf, te_ckpt, out_csv, te_attr,
                                    te_force);
        if (*er)
            return cmd_edit_ref(cfg, er_src, er_ref, er_ckpt, er_out_codes, out_csv, er_force);
        if (*me) {
            if (me_kind == "mse") return cmd_metrics_mse(me_a, me_b, out_csv);
            if (me_kind == "swd") return cmd_metrics_swd(me_a, me_b, me_proj, me_seed, out_csv);
            return cmd_metrics_ad(cfg, me_codes, me_data, me_clf, me_attr, me_target, me_steps,
                                  me_kind == "rescoring", me_alpha, out_csv, me_force);
        }
        if (*ins) return cmd_inspect(ins_ckpt, out_csv);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 1;
}
