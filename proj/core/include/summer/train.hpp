#pragma once

#include "summer/checkpoint.hpp"
#include "summer/config.hpp"
#include "summer/data.hpp"
#include "summer/gradcheck.hpp"
#include "summer/losses.hpp"
#include "summer/metrics.hpp"
#include "summer/student.hpp"
#include "summer/teacher.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace summer {

// Per-component seeds expanded from the root seed.
std::uint64_t init_seed(const ModelConfig& config);
std::uint64_t noise_seed(const ModelConfig& config);
std::uint64_t batch_seed(const ModelConfig& config);

// Position table sized to the longest dialogue seen, never below the configured size.
ModelConfig fit_positions(ModelConfig config, const std::vector<DialogueRecord>& a,
                          const std::vector<DialogueRecord>& b = {});

// Shuffled dialogue indices chunked into batches, fixed by (seed, epoch).
std::vector<std::vector<std::size_t>> make_batches(std::size_t count, std::size_t batch_size, std::uint64_t seed,
                                                   std::size_t epoch);

using Batch = std::vector<const DialogueRecord*>;

SmoothingForm smoothing_form(const ModelConfig& config);
LossWeights loss_weights(const ModelConfig& config);

// Teacher objective: align + smooth, reported with kappa (0, 1, 1).
IkdLoss teacher_loss(const TeacherModel& teacher, const Batch& batch, Mode mode, std::uint64_t noise_seed);

// Student objective over every utterance in the batch. Dialogue k draws its
// routing noise from derive_seed(noise_seed, k). `teacher` may be null only
// when distillation is off.
IkdLoss student_loss(const StudentModel& student, const TeacherModel* teacher, const Batch& batch, Mode mode,
                     std::uint64_t noise_seed);

struct EpochLog {
    std::size_t epoch = 0;
    double l_cross = 0.0;
    double l_align = 0.0;
    double l_smooth = 0.0;
    double total = 0.0;
    double val_wf1 = 0.0;
    double val_acc = 0.0;
    std::optional<double> train_acc;
};

struct TrainOptions {
    std::size_t epochs = 0; // 0: take from config
    bool track_train_accuracy = false;
    // Stop after the first epoch whose train accuracy exceeds this (0: never).
    double stop_at_train_accuracy = 0.0;
    // Student only: optimise the align loss alone, skipping distillation.
    bool plain_ce = false;
    std::function<void(const EpochLog&)> on_epoch;
};

struct TeacherRun {
    TeacherModel model;
    std::vector<EpochLog> log;
    std::size_t best_epoch = 0;
    double best_val_wf1 = 0.0;
};

struct StudentRun {
    StudentModel model;
    std::vector<EpochLog> log;
    std::size_t best_epoch = 0;
    double best_val_wf1 = 0.0;
};

/// Trains the text teacher, restores the best validation w-F1 snapshot and
/// freezes it.
TeacherRun train_teacher(const ModelConfig& config, const std::vector<DialogueRecord>& train,
                         const std::vector<DialogueRecord>& val, const TrainOptions& options = {});

/// Trains the student against a frozen teacher (ignored when distillation is
/// off). Fails if any gradient reaches the teacher or its checksum moves.
StudentRun train_student(const ModelConfig& config, const TeacherModel* teacher,
                         const std::vector<DialogueRecord>& train, const std::vector<DialogueRecord>& val,
                         const TrainOptions& options = {});

struct Predictions {
    std::vector<std::string> dialogue_ids;
    std::vector<std::size_t> positions;
    std::vector<std::size_t> labels;
    std::vector<std::size_t> predicted;
    std::vector<std::vector<double>> features; // classifier input per utterance
};

Predictions predict(const StudentModel& model, const std::vector<DialogueRecord>& data);
Predictions predict(const TeacherModel& model, const std::vector<DialogueRecord>& data);
EvalReport evaluate(const StudentModel& model, const std::vector<DialogueRecord>& data);
EvalReport evaluate(const TeacherModel& model, const std::vector<DialogueRecord>& data);

// CSV: dialogue_id,index,label,predicted,f0,...,f{d_s-1}
void export_embeddings(const StudentModel& model, const std::vector<DialogueRecord>& data, const std::string& path);
std::string embeddings_csv(const Predictions& predictions);

// JSON Lines, one record per epoch.
std::string loss_log_line(const EpochLog& entry);
void write_loss_log(const std::string& path, const std::vector<EpochLog>& log);

Checkpoint teacher_checkpoint(const TeacherModel& model, std::uint64_t epoch);
Checkpoint student_checkpoint(const StudentModel& model, std::uint64_t epoch);
TeacherModel load_teacher(const Checkpoint& checkpoint);
StudentModel load_student(const Checkpoint& checkpoint);

// Small dimensions that keep an exhaustive finite-difference sweep cheap.
ModelConfig gradcheck_config(ModelConfig base);

/// Finite-difference check of the full student objective (with a frozen
/// teacher when distillation is on) on the first two synthetic dialogues,
/// with routing noise fixed.
GradCheckResult check_student_gradients(const ModelConfig& config, double eps = 1e-5);

} // namespace summer
