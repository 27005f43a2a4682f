#include "summer/train.hpp"

#include "summer/errors.hpp"
#include "summer/optim.hpp"
#include "summer/random.hpp"

#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace summer {

std::uint64_t init_seed(const ModelConfig& config)
{
    return derive_seed(config.seed, "init");
}

std::uint64_t noise_seed(const ModelConfig& config)
{
    return derive_seed(config.seed, "noise");
}

std::uint64_t batch_seed(const ModelConfig& config)
{
    return derive_seed(config.seed, "batches");
}

ModelConfig fit_positions(ModelConfig config, const std::vector<DialogueRecord>& a,
                          const std::vector<DialogueRecord>& b)
{
    config.max_positions = std::max({config.max_positions, longest_dialogue(a), longest_dialogue(b)});
    return config;
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t count, std::size_t batch_size, std::uint64_t seed,
                                                   std::size_t epoch)
{
    if (batch_size == 0)
        throw ConfigError("batch_size must be > 0");
    std::vector<std::size_t> order(count);
    for (std::size_t i = 0; i < count; ++i)
        order[i] = i;
    Rng rng(derive_seed(seed, epoch));
    rng.shuffle(order);
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t i = 0; i < count; i += batch_size)
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                             order.begin() + static_cast<std::ptrdiff_t>(std::min(count, i + batch_size)));
    return batches;
}

SmoothingForm smoothing_form(const ModelConfig& config)
{
    return config.literal_smoothing ? SmoothingForm::Literal : SmoothingForm::Standard;
}

LossWeights loss_weights(const ModelConfig& config)
{
    return {config.ikd ? config.kappa1 : 0.0, config.kappa2, config.kappa3};
}

namespace {

std::vector<std::size_t> batch_labels(const Batch& batch)
{
    std::vector<std::size_t> labels;
    for (const auto* d : batch)
        for (const auto& u : d->utterances)
            labels.push_back(u.label);
    return labels;
}

std::vector<std::size_t> argmax_rows(const Tensor& logits)
{
    std::vector<std::size_t> out(logits.rows());
    const auto v = logits.values();
    const std::size_t c = logits.cols();
    for (std::size_t r = 0; r < out.size(); ++r) {
        const auto row = v.subspan(r * c, c);
        out[r] = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    }
    return out;
}

// Teacher probabilities for each dialogue of a batch, or empty without distillation.
using TeacherProbs = std::vector<Tensor>;

Tensor teacher_probabilities(const TeacherModel& teacher, const DialogueRecord& d)
{
    return softmax(teacher.forward(d, Mode::Eval, 0).logits).detach();
}

IkdLoss student_objective(const StudentModel& student, const TeacherModel* teacher, const Batch& batch,
                          const TeacherProbs& teacher_probs, Mode mode, std::uint64_t seed, bool plain_ce)
{
    const ModelConfig& cfg = student.config();
    std::vector<Tensor> logits;
    std::vector<Tensor> features;
    for (std::size_t k = 0; k < batch.size(); ++k) {
        auto out = student.forward(*batch[k], mode, derive_seed(seed, k));
        logits.push_back(out.logits);
        features.push_back(out.features);
    }
    const auto labels = batch_labels(batch);
    const Tensor p_student = softmax(concat_rows(logits));
    const Tensor l_align = align_loss(p_student, labels);
    if (plain_ce)
        return ikd_total(Tensor::scalar(0.0), l_align, Tensor::scalar(0.0), {0.0, 1.0, 0.0});

    const Tensor l_smooth = label_smooth_loss(p_student, labels, cfg.epsilon, smoothing_form(cfg));
    Tensor l_cross = Tensor::scalar(0.0);
    if (cfg.ikd) {
        if (teacher == nullptr)
            throw ContractError("distillation is on but no teacher was given");
        const Tensor guided = teacher_logits_on_student(*teacher, student.adapt(concat_rows(features)));
        l_cross = cross_kd_loss(concat_rows(teacher_probs), softmax(guided));
    }
    return ikd_total(l_cross, l_align, l_smooth, loss_weights(cfg));
}

struct Snapshot {
    std::vector<std::vector<double>> values;

    static Snapshot take(const ParamList& params)
    {
        Snapshot s;
        for (const auto& p : params)
            s.values.emplace_back(p.tensor.values().begin(), p.tensor.values().end());
        return s;
    }
    void restore(ParamList& params) const
    {
        for (std::size_t k = 0; k < params.size(); ++k) {
            auto dst = params[k].tensor.mutable_values();
            std::copy(values[k].begin(), values[k].end(), dst.begin());
        }
    }
};

struct Accumulator {
    double cross = 0.0, align = 0.0, smooth = 0.0;
    std::size_t weight = 0;

    void add(const LossBreakdown& b, std::size_t n)
    {
        const double w = static_cast<double>(n);
        cross += w * b.l_cross;
        align += w * b.l_align;
        smooth += w * b.l_smooth;
        weight += n;
    }
};

struct FitResult {
    std::vector<EpochLog> log;
    std::size_t best_epoch = 0;
    double best_val_wf1 = 0.0;
};

// Shared epoch loop. `loss` computes the batch objective, `score` evaluates a dataset.
FitResult fit(const ModelConfig& cfg, ParamList params, const std::vector<DialogueRecord>& train,
              const std::vector<DialogueRecord>& val, const TrainOptions& options, const LossWeights& logged,
              const std::function<IkdLoss(const Batch&, const std::vector<std::size_t>&, std::uint64_t)>& loss,
              const std::function<EvalReport(const std::vector<DialogueRecord>&)>& score,
              const std::function<void()>& after_backward)
{
    if (train.empty())
        throw ValidationError("training set is empty");
    const auto& selection = val.empty() ? train : val;
    if (val.empty())
        spdlog::warn("validation set is empty; selecting checkpoints on training w-F1");

    Adam adam(params, {cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps, cfg.weight_decay});
    const std::size_t epochs = options.epochs != 0 ? options.epochs : cfg.epochs;
    const std::uint64_t shuffle_seed = batch_seed(cfg);
    const std::uint64_t noise_root = noise_seed(cfg);

    FitResult result;
    Snapshot best = Snapshot::take(params);
    bool have_best = false;
    for (std::size_t epoch = 1; epoch <= epochs; ++epoch) {
        Accumulator acc;
        const auto batches = make_batches(train.size(), cfg.batch_size, shuffle_seed, epoch);
        for (std::size_t b = 0; b < batches.size(); ++b) {
            Batch batch;
            for (auto i : batches[b])
                batch.push_back(&train[i]);
            const IkdLoss l = loss(batch, batches[b], derive_seed(noise_root, epoch, b));
            backward(l.total);
            after_backward();
            adam.step();
            std::size_t n = 0;
            for (const auto* d : batch)
                n += d->size();
            acc.add(l.breakdown, n);
        }

        EpochLog entry;
        entry.epoch = epoch;
        const double w = static_cast<double>(acc.weight);
        entry.l_cross = acc.cross / w;
        entry.l_align = acc.align / w;
        entry.l_smooth = acc.smooth / w;
        entry.total = recombine(logged, entry.l_cross, entry.l_align, entry.l_smooth);
        const EvalReport report = score(selection);
        entry.val_wf1 = report.weighted_f1;
        entry.val_acc = report.accuracy;
        if (options.track_train_accuracy || options.stop_at_train_accuracy > 0.0)
            entry.train_acc = score(train).accuracy;

        if (!have_best || entry.val_wf1 > result.best_val_wf1) {
            have_best = true;
            result.best_val_wf1 = entry.val_wf1;
            result.best_epoch = epoch;
            best = Snapshot::take(params);
        }
        result.log.push_back(entry);
        if (options.on_epoch)
            options.on_epoch(entry);
        if (options.stop_at_train_accuracy > 0.0 && *entry.train_acc > options.stop_at_train_accuracy)
            break;
    }
    best.restore(params);
    return result;
}

Predictions collect_predictions(const std::vector<DialogueRecord>& data,
                                const std::function<std::pair<Tensor, Tensor>(const DialogueRecord&)>& run)
{
    if (data.empty())
        throw ValidationError("cannot evaluate an empty dataset");
    Predictions p;
    for (const auto& d : data) {
        const auto [logits, features] = run(d);
        const auto predicted = argmax_rows(logits);
        const std::size_t width = features.cols();
        for (std::size_t i = 0; i < d.size(); ++i) {
            p.dialogue_ids.push_back(d.dialogue_id);
            p.positions.push_back(i);
            p.labels.push_back(d.utterances[i].label);
            p.predicted.push_back(predicted[i]);
            const auto row = features.values().subspan(i * width, width);
            p.features.emplace_back(row.begin(), row.end());
        }
    }
    return p;
}

void check_labels(const std::vector<DialogueRecord>& data, std::size_t classes)
{
    for (const auto& d : data)
        for (const auto& u : d.utterances)
            if (u.label >= classes)
                throw ConfigError("dialogue " + d.dialogue_id + " has label " + std::to_string(u.label) +
                                  " but the model has " + std::to_string(classes) + " classes");
}

} // namespace

IkdLoss teacher_loss(const TeacherModel& teacher, const Batch& batch, Mode mode, std::uint64_t noise_seed)
{
    const ModelConfig& cfg = teacher.config();
    std::vector<Tensor> logits;
    for (std::size_t k = 0; k < batch.size(); ++k)
        logits.push_back(teacher.forward(*batch[k], mode, derive_seed(noise_seed, k)).logits);
    const auto labels = batch_labels(batch);
    const Tensor p = softmax(concat_rows(logits));
    return ikd_total(Tensor::scalar(0.0), align_loss(p, labels),
                     label_smooth_loss(p, labels, cfg.epsilon, smoothing_form(cfg)), {0.0, 1.0, 1.0});
}

IkdLoss student_loss(const StudentModel& student, const TeacherModel* teacher, const Batch& batch, Mode mode,
                     std::uint64_t noise_seed)
{
    TeacherProbs probs;
    if (student.config().ikd && teacher != nullptr)
        for (const auto* d : batch)
            probs.push_back(teacher_probabilities(*teacher, *d));
    return student_objective(student, teacher, batch, probs, mode, noise_seed, false);
}

TeacherRun train_teacher(const ModelConfig& config, const std::vector<DialogueRecord>& train,
                         const std::vector<DialogueRecord>& val, const TrainOptions& options)
{
    const ModelConfig cfg = fit_positions(config, train, val);
    check_labels(train, cfg.num_classes);
    check_labels(val, cfg.num_classes);
    TeacherRun run{TeacherModel(cfg, init_seed(cfg)), {}, 0, 0.0};
    TrainOptions opts = options;
    if (opts.epochs == 0)
        opts.epochs = cfg.teacher_epochs;

    const TeacherModel& model = run.model;
    auto fitted = fit(
        cfg, model.parameters(), train, val, opts, {0.0, 1.0, 1.0},
        [&](const Batch& batch, const std::vector<std::size_t>&, std::uint64_t seed) {
            return teacher_loss(model, batch, Mode::Train, seed);
        },
        [&](const std::vector<DialogueRecord>& data) { return evaluate(model, data); }, [] {});
    run.log = std::move(fitted.log);
    run.best_epoch = fitted.best_epoch;
    run.best_val_wf1 = fitted.best_val_wf1;
    run.model.freeze();
    return run;
}

StudentRun train_student(const ModelConfig& config, const TeacherModel* teacher,
                         const std::vector<DialogueRecord>& train, const std::vector<DialogueRecord>& val,
                         const TrainOptions& options)
{
    ModelConfig cfg = fit_positions(config, train, val);
    check_labels(train, cfg.num_classes);
    check_labels(val, cfg.num_classes);
    const bool distill = cfg.ikd && !options.plain_ce;
    ParamList teacher_params;
    std::uint64_t teacher_sum = 0;
    if (distill) {
        if (teacher == nullptr)
            throw ConfigError("teacher checkpoint required");
        if (!teacher->frozen())
            throw ContractError("teacher must be frozen before it guides the student");
        if (teacher->config().num_classes != cfg.num_classes)
            throw ConfigError("teacher has " + std::to_string(teacher->config().num_classes) +
                              " classes, student " + std::to_string(cfg.num_classes));
        if (cfg.teacher_width == 0)
            cfg.teacher_width = teacher->feature_width();
        if (cfg.teacher_width != teacher->feature_width())
            throw ConfigError("teacher_width is " + std::to_string(cfg.teacher_width) + " but the teacher has " +
                              std::to_string(teacher->feature_width()));
        teacher_params = teacher->parameters();
        teacher_sum = checksum(teacher_params);
    }

    StudentRun run{StudentModel(cfg, init_seed(cfg)), {}, 0, 0.0};
    const StudentModel& model = run.model;

    // The teacher is frozen and evaluated without noise, so its outputs are
    // fixed for the whole run.
    std::vector<Tensor> cached;
    if (distill)
        for (const auto& d : train)
            cached.push_back(teacher_probabilities(*teacher, d));

    const LossWeights logged = options.plain_ce ? LossWeights{0.0, 1.0, 0.0} : loss_weights(cfg);
    auto fitted = fit(
        cfg, model.parameters(), train, val, options, logged,
        [&](const Batch& batch, const std::vector<std::size_t>& indices, std::uint64_t seed) {
            TeacherProbs probs;
            if (distill)
                for (auto i : indices)
                    probs.push_back(cached[i]);
            return student_objective(model, distill ? teacher : nullptr, batch, probs, Mode::Train, seed,
                                     options.plain_ce);
        },
        [&](const std::vector<DialogueRecord>& data) { return evaluate(model, data); },
        [&] {
            for (const auto& p : teacher_params)
                if (p.tensor.has_grad())
                    throw ContractError("gradient reached frozen teacher parameter '" + p.name + "'");
        });
    if (distill && checksum(teacher_params) != teacher_sum)
        throw ContractError("teacher parameters changed during student training");

    run.log = std::move(fitted.log);
    run.best_epoch = fitted.best_epoch;
    run.best_val_wf1 = fitted.best_val_wf1;
    return run;
}

Predictions predict(const StudentModel& model, const std::vector<DialogueRecord>& data)
{
    check_labels(data, model.config().num_classes);
    return collect_predictions(data, [&](const DialogueRecord& d) {
        auto out = model.forward(d, Mode::Eval, 0);
        return std::pair{out.logits, out.features};
    });
}

Predictions predict(const TeacherModel& model, const std::vector<DialogueRecord>& data)
{
    check_labels(data, model.config().num_classes);
    return collect_predictions(data, [&](const DialogueRecord& d) {
        auto out = model.forward(d, Mode::Eval, 0);
        return std::pair{out.logits, out.features};
    });
}

EvalReport evaluate(const StudentModel& model, const std::vector<DialogueRecord>& data)
{
    const auto p = predict(model, data);
    return compute_report(p.labels, p.predicted, model.config().num_classes);
}

EvalReport evaluate(const TeacherModel& model, const std::vector<DialogueRecord>& data)
{
    const auto p = predict(model, data);
    return compute_report(p.labels, p.predicted, model.config().num_classes);
}

std::string embeddings_csv(const Predictions& p)
{
    std::string out = "dialogue_id,index,label,predicted";
    const std::size_t width = p.features.empty() ? 0 : p.features.front().size();
    for (std::size_t j = 0; j < width; ++j)
        out += fmt::format(",f{}", j);
    out += '\n';
    for (std::size_t i = 0; i < p.labels.size(); ++i) {
        out += fmt::format("{},{},{},{}", p.dialogue_ids[i], p.positions[i], p.labels[i], p.predicted[i]);
        for (double v : p.features[i])
            out += fmt::format(",{}", v);
        out += '\n';
    }
    return out;
}

void export_embeddings(const StudentModel& model, const std::vector<DialogueRecord>& data, const std::string& path)
{
    const std::string text = embeddings_csv(predict(model, data));
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw IoError("cannot write embeddings to '" + path + "'");
    out << text;
    if (!out)
        throw IoError("failed writing embeddings to '" + path + "'");
}

std::string loss_log_line(const EpochLog& e)
{
    nlohmann::json j{{"epoch", e.epoch},     {"l_cross", e.l_cross}, {"l_align", e.l_align},
                     {"l_smooth", e.l_smooth}, {"total", e.total},   {"val_wf1", e.val_wf1},
                     {"val_acc", e.val_acc}};
    if (e.train_acc)
        j["train_acc"] = *e.train_acc;
    return j.dump();
}

void write_loss_log(const std::string& path, const std::vector<EpochLog>& log)
{
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw IoError("cannot write loss log '" + path + "'");
    for (const auto& e : log)
        out << loss_log_line(e) << '\n';
}

Checkpoint teacher_checkpoint(const TeacherModel& model, std::uint64_t epoch)
{
    return make_checkpoint("teacher", epoch, model.config().seed, to_string(model.config()), model.parameters());
}

Checkpoint student_checkpoint(const StudentModel& model, std::uint64_t epoch)
{
    return make_checkpoint("student", epoch, model.config().seed, to_string(model.config()), model.parameters());
}

TeacherModel load_teacher(const Checkpoint& checkpoint)
{
    if (checkpoint.kind != "teacher")
        throw ValidationError("expected a teacher checkpoint, got '" + checkpoint.kind + "'");
    const ModelConfig cfg = parse_config(checkpoint.config);
    TeacherModel model(cfg, init_seed(cfg));
    restore_parameters(model.parameters(), checkpoint);
    model.freeze();
    return model;
}

StudentModel load_student(const Checkpoint& checkpoint)
{
    if (checkpoint.kind != "student")
        throw ValidationError("expected a student checkpoint, got '" + checkpoint.kind + "'");
    const ModelConfig cfg = parse_config(checkpoint.config);
    StudentModel model(cfg, init_seed(cfg));
    restore_parameters(model.parameters(), checkpoint);
    return model;
}

ModelConfig gradcheck_config(ModelConfig base)
{
    base.d_t = 5;
    base.d_a = 4;
    base.d_v = 6;
    base.d_s = 6;
    base.heads = 2;
    base.d_head = 3;
    base.fusion_layers = 2;
    base.gru_hidden = 4;
    base.ffn_hidden = 8;
    base.teacher_width = 0;
    base.utterances = 12;
    base.min_dialogue = 2;
    base.max_dialogue = 3;
    return base;
}

GradCheckResult check_student_gradients(const ModelConfig& config, double eps)
{
    ModelConfig cfg = config;
    cfg.validate();
    auto data = generate_synthetic(cfg, derive_seed(cfg.seed, "data"));
    if (data.size() < 2)
        throw ConfigError("gradient check needs at least two dialogues");
    data.resize(2);

    std::optional<TeacherModel> teacher;
    if (cfg.ikd) {
        cfg.teacher_width = cfg.d_s;
        teacher.emplace(cfg, derive_seed(init_seed(cfg), "teacher"));
        teacher->freeze();
    }
    const StudentModel student(cfg, init_seed(cfg));
    const Batch batch{&data[0], &data[1]};
    const std::uint64_t seed = noise_seed(cfg);
    return finite_difference_check(
        [&] { return student_loss(student, teacher ? &*teacher : nullptr, batch, Mode::Train, seed).total; },
        student.parameters(), eps);
}

} // namespace summer
