#include "summer/teacher.hpp"

#include "summer/errors.hpp"

namespace summer {

TeacherModel::TeacherModel(const ModelConfig& config, std::uint64_t init_seed) : config_(config)
{
    config_.validate();
    if (config_.d_t == 0)
        throw ConfigError("teacher needs text features");
    Rng embed_rng(derive_seed(init_seed, "teacher.embedding"));
    embedding_ = EmbeddingParams::create(embed_rng, config_, "t");
    Rng moe_rng(derive_seed(init_seed, "teacher.sdmoe"));
    moe_ = SdMoe(moe_rng, config_.experts, config_.d_s, config_.gru_hidden);
    Rng enc_rng(derive_seed(init_seed, "teacher.encoder"));
    encoder_ = FusionStack(enc_rng, config_);
    output_norm_ = LayerNorm(config_.d_s);
    Rng cls_rng(derive_seed(init_seed, "teacher.classifier"));
    classifier_ = Linear(cls_rng, config_.d_s, config_.num_classes);
}

TeacherOutput TeacherModel::forward(const DialogueRecord& dialogue, Mode mode, std::uint64_t noise_seed) const
{
    const RoutingOptions routing{config_.tau, config_.alpha, config_.one_sided};
    const Tensor embedded = embed_modality(dialogue, embedding_, 't');
    auto moe = moe_.forward(embedded, routing, mode, derive_seed(noise_seed, "t"));
    TeacherOutput out;
    out.features = output_norm_(encoder_.self_attend(moe.output));
    out.logits = classifier_(out.features);
    out.gate = std::move(moe.gate);
    return out;
}

Tensor TeacherModel::classify(const Tensor& features) const
{
    if (features.cols() != feature_width())
        throw DimensionError("teacher classifier expects width " + std::to_string(feature_width()) + ", got " +
                             std::to_string(features.cols()));
    return classifier_(features);
}

void TeacherModel::freeze()
{
    auto params = parameters();
    zero_grads(params);
    set_trainable(params, false);
    frozen_ = true;
}

ParamList TeacherModel::parameters() const
{
    ParamList out;
    embedding_.collect(out, "teacher.embedding");
    moe_.collect(out, "teacher.sdmoe");
    encoder_.collect(out, "teacher.encoder");
    output_norm_.collect(out, "teacher.output_norm");
    classifier_.collect(out, "teacher.classifier");
    return out;
}

Tensor teacher_logits_on_student(const TeacherModel& teacher, const Tensor& student_intermediate)
{
    if (!teacher.frozen())
        throw ContractError("teacher must be frozen before it guides the student");
    return teacher.classify(student_intermediate);
}

} // namespace summer
