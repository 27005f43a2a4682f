// summer: data generation, training, evaluation and gradient checks.

#include "summer/checkpoint.hpp"
#include "summer/config.hpp"
#include "summer/data.hpp"
#include "summer/errors.hpp"
#include "summer/metrics.hpp"
#include "summer/train.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <chrono>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

using namespace summer;

struct CommonArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> overrides;
    bool no_sdmoe = false;
    bool no_hcmf = false;
    bool no_ikd = false;
    bool literal_smoothing = false;
    std::string branches;
    std::string modalities;
};

void add_common(CLI::App& cmd, CommonArgs& a)
{
    cmd.add_option("--config", a.config_path, "Config file (key = value with [section] headers)");
    cmd.add_option("--seed", a.seed, "Root seed; overrides run.seed");
    cmd.add_option("--set", a.overrides, "Override one key, e.g. --set optim.lr=0.01 (repeatable)");
    cmd.add_flag("--no-sdmoe", a.no_sdmoe, "Replace the expert mixture with one BiGRU");
    cmd.add_flag("--no-hcmf", a.no_hcmf, "Replace fusion with concatenation + linear projection");
    cmd.add_flag("--no-ikd", a.no_ikd, "Train with align + smooth losses only");
    cmd.add_flag("--literal-smoothing", a.literal_smoothing, "Use the literal -p log(gt~) smoothing term");
    cmd.add_option("--branches", a.branches, "Fusion branches")->check(CLI::IsMember({"all", "text"}));
    cmd.add_option("--modalities", a.modalities, "Subset of 'tav' to use");
}

// Defaults, then the config file, then SUMMER_* variables, then flags.
ModelConfig resolve(const CommonArgs& a)
{
    ModelConfig cfg = a.config_path.empty() ? ModelConfig{} : load_config(a.config_path);
    apply_env_overrides(cfg);
    for (const auto& kv : a.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw ConfigError("--set expects key=value, got '" + kv + "'");
        set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (a.seed)
        cfg.seed = *a.seed;
    if (a.no_sdmoe)
        cfg.sdmoe = false;
    if (a.no_hcmf)
        cfg.hcmf = false;
    if (a.no_ikd)
        cfg.ikd = false;
    if (a.literal_smoothing)
        cfg.literal_smoothing = true;
    if (!a.branches.empty())
        set_config_value(cfg, "ablation.branches", a.branches);
    if (!a.modalities.empty())
        cfg.modalities = a.modalities;
    cfg.validate();
    return cfg;
}

void echo_config(const ModelConfig& cfg)
{
    std::cout << "# resolved config\n" << to_string(cfg) << std::flush;
}

std::string pick(const std::string& flag, const std::string& fallback, const char* what)
{
    if (!flag.empty())
        return flag;
    if (!fallback.empty())
        return fallback;
    throw ValidationError(std::string(what) + " required");
}

// Explicit --val data, or a split of the training file by the configured fractions.
std::pair<std::vector<DialogueRecord>, std::vector<DialogueRecord>> training_data(const ModelConfig& cfg,
                                                                                  const std::string& data,
                                                                                  const std::string& val)
{
    auto records = load_dialogues(data, cfg);
    if (!val.empty())
        return {std::move(records), load_dialogues(val, cfg)};
    const double held = cfg.train_fraction + cfg.val_fraction;
    auto split = split_dataset(records, {cfg.train_fraction / held, cfg.val_fraction / held, 0.0},
                               derive_seed(cfg.seed, "split"));
    return {std::move(split.train), std::move(split.val)};
}

void print_epoch(const EpochLog& e)
{
    std::cout << fmt::format("epoch {:>4}  l_cross {:.6f}  l_align {:.6f}  l_smooth {:.6f}  total {:.6f}  "
                             "val_wf1 {:.4f}  val_acc {:.4f}\n",
                             e.epoch, e.l_cross, e.l_align, e.l_smooth, e.total, e.val_wf1, e.val_acc)
              << std::flush;
}

void write_text(const std::string& path, const std::string& text)
{
    std::ofstream out(path, std::ios::trunc);
    if (!out || !(out << text))
        throw IoError("cannot write '" + path + "'");
}

// Every flag shows a default in --help, including flags and unset options.
void label_defaults(CLI::App& app)
{
    for (auto* sub : app.get_subcommands({})) {
        for (auto* opt : sub->get_options()) {
            if (opt->get_name() == "--help" || !opt->get_default_str().empty())
                continue;
            opt->default_str(opt->get_expected_max() == 0 ? "false" : "unset");
        }
    }
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"SUMMER multimodal emotion recognition: training and evaluation"};
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();

    CommonArgs common;

    std::string out_path, train_out, val_out, test_out;
    auto* gen = app.add_subcommand("gen-data", "Write a seeded synthetic corpus");
    add_common(*gen, common);
    gen->add_option("--out", out_path, "Output JSONL for the whole corpus")->required();
    gen->add_option("--train-out", train_out, "Also write the train split here");
    gen->add_option("--val-out", val_out, "Also write the validation split here");
    gen->add_option("--test-out", test_out, "Also write the test split here");

    std::string data_path, val_path, ckpt_out, log_path, teacher_ckpt;
    std::size_t epochs = 0;
    auto* tt = app.add_subcommand("train-teacher", "Train and freeze the text teacher");
    add_common(*tt, common);
    tt->add_option("--data", data_path, "Training JSONL (default paths.data)");
    tt->add_option("--val", val_path, "Validation JSONL; without it the data file is split");
    tt->add_option("--out", ckpt_out, "Checkpoint to write")->required();
    tt->add_option("--log", log_path, "Per-epoch loss log (JSON Lines)");
    tt->add_option("--epochs", epochs, "Epochs (0: optim.teacher_epochs)");

    auto* ts = app.add_subcommand("train-student", "Train the multimodal student");
    add_common(*ts, common);
    ts->add_option("--data", data_path, "Training JSONL (default paths.data)");
    ts->add_option("--val", val_path, "Validation JSONL; without it the data file is split");
    ts->add_option("--teacher-checkpoint", teacher_ckpt, "Frozen teacher checkpoint");
    ts->add_option("--out", ckpt_out, "Checkpoint to write")->required();
    ts->add_option("--log", log_path, "Per-epoch loss log (JSON Lines)");
    ts->add_option("--epochs", epochs, "Epochs (0: optim.epochs)");

    std::string ckpt_in, report_path;
    auto* ev = app.add_subcommand("eval", "Evaluate a teacher or student checkpoint");
    ev->add_option("--checkpoint", ckpt_in, "Checkpoint to evaluate")->required();
    ev->add_option("--data", data_path, "Evaluation JSONL")->required();
    ev->add_option("--report", report_path, "Write the report as JSON here");

    auto* ex = app.add_subcommand("export-embeddings", "Write fused per-utterance vectors as CSV");
    ex->add_option("--checkpoint", ckpt_in, "Student checkpoint")->required();
    ex->add_option("--data", data_path, "Input JSONL")->required();
    ex->add_option("--out", out_path, "CSV to write")->required();

    double eps = 1e-5;
    double tolerance = 1e-4;
    bool full_size = false;
    auto* cg = app.add_subcommand("check-grads", "Finite-difference check of the student objective");
    add_common(*cg, common);
    cg->add_option("--eps", eps, "Central-difference step");
    cg->add_option("--tolerance", tolerance, "Maximum accepted relative error");
    cg->add_flag("--full-size", full_size, "Check at the configured dimensions instead of reduced ones");

    label_defaults(app);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "ERROR: " << e.what() << '\n';
        return 1;
    }

    try {
        if (*gen) {
            const ModelConfig cfg = resolve(common);
            echo_config(cfg);
            const auto records = generate_synthetic(cfg, derive_seed(cfg.seed, "data"));
            write_dialogues(out_path, records);
            std::cout << fmt::format("wrote {} dialogues ({} utterances) to {}\n", records.size(),
                                     utterance_count(records), out_path);
            if (!train_out.empty() || !val_out.empty() || !test_out.empty()) {
                const auto split =
                    split_dataset(records, {cfg.train_fraction, cfg.val_fraction, cfg.test_fraction},
                                  derive_seed(cfg.seed, "split"));
                if (!train_out.empty())
                    write_dialogues(train_out, split.train);
                if (!val_out.empty())
                    write_dialogues(val_out, split.val);
                if (!test_out.empty())
                    write_dialogues(test_out, split.test);
                std::cout << fmt::format("split {}/{}/{} dialogues\n", split.train.size(), split.val.size(),
                                         split.test.size());
            }
        } else if (*tt) {
            const ModelConfig cfg = resolve(common);
            echo_config(cfg);
            const auto [train, val] =
                training_data(cfg, pick(data_path, cfg.data_path, "--data"), val_path.empty() ? cfg.val_path : val_path);
            TrainOptions opts;
            opts.epochs = epochs;
            opts.on_epoch = print_epoch;
            const auto run = train_teacher(cfg, train, val, opts);
            save_checkpoint(ckpt_out, teacher_checkpoint(run.model, run.best_epoch));
            if (!log_path.empty())
                write_loss_log(log_path, run.log);
            std::cout << fmt::format("best epoch {} val_wf1 {:.4f}; teacher frozen and saved to {}\n",
                                     run.best_epoch, run.best_val_wf1, ckpt_out);
        } else if (*ts) {
            const ModelConfig cfg = resolve(common);
            echo_config(cfg);
            const std::string teacher_path = teacher_ckpt.empty() ? cfg.teacher_checkpoint : teacher_ckpt;
            if (cfg.ikd && teacher_path.empty())
                throw ValidationError("teacher checkpoint required");
            const auto [train, val] =
                training_data(cfg, pick(data_path, cfg.data_path, "--data"), val_path.empty() ? cfg.val_path : val_path);
            std::optional<TeacherModel> teacher;
            if (cfg.ikd)
                teacher.emplace(load_teacher(load_checkpoint(teacher_path)));
            TrainOptions opts;
            opts.epochs = epochs;
            opts.on_epoch = print_epoch;
            const auto run = train_student(cfg, teacher ? &*teacher : nullptr, train, val, opts);
            save_checkpoint(ckpt_out, student_checkpoint(run.model, run.best_epoch));
            if (!log_path.empty())
                write_loss_log(log_path, run.log);
            std::cout << fmt::format("best epoch {} val_wf1 {:.4f}; student saved to {}\n", run.best_epoch,
                                     run.best_val_wf1, ckpt_out);
        } else if (*ev) {
            const Checkpoint ckpt = load_checkpoint(ckpt_in);
            const ModelConfig cfg = parse_config(ckpt.config);
            echo_config(cfg);
            const auto data = load_dialogues(data_path, cfg);
            const EvalReport report = ckpt.kind == "teacher" ? evaluate(load_teacher(ckpt), data)
                                                             : evaluate(load_student(ckpt), data);
            const std::string json = report_to_json(report);
            if (!report_path.empty())
                write_text(report_path, json + "\n");
            std::cout << json << '\n';
        } else if (*ex) {
            const Checkpoint ckpt = load_checkpoint(ckpt_in);
            const ModelConfig cfg = parse_config(ckpt.config);
            echo_config(cfg);
            const auto data = load_dialogues(data_path, cfg);
            export_embeddings(load_student(ckpt), data, out_path);
            std::cout << fmt::format("wrote {} rows to {}\n", utterance_count(data), out_path);
        } else if (*cg) {
            ModelConfig cfg = resolve(common);
            if (!full_size)
                cfg = gradcheck_config(cfg);
            echo_config(cfg);
            const auto start = std::chrono::steady_clock::now();
            const GradCheckResult r = check_student_gradients(cfg, eps);
            const double seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            std::cout << fmt::format("checked {} scalars in {:.1f}s; max relative error {:.3e} at {}[{}] "
                                     "(analytic {:.6e}, numeric {:.6e})\n",
                                     r.checked, seconds, r.max_relative_error, r.worst_param, r.worst_index,
                                     r.worst_analytic, r.worst_numeric);
            if (!(r.max_relative_error < tolerance))
                throw ValidationError(fmt::format("gradient check failed: {:.3e} >= {:.1e}", r.max_relative_error,
                                                  tolerance));
        }
    } catch (const summer::Error& e) {
        std::cerr << "ERROR: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
