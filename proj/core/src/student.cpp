#include "summer/student.hpp"

#include "summer/errors.hpp"

namespace summer {

StudentModel::StudentModel(const ModelConfig& config, std::uint64_t init_seed) : config_(config)
{
    config_.validate();
    const std::string& mods = config_.modalities;

    Rng embed_rng(derive_seed(init_seed, "student.embedding"));
    embedding_ = EmbeddingParams::create(embed_rng, config_, mods);

    for (char m : mods) {
        Rng rng(derive_seed(init_seed, std::string("student.sdmoe.") + m));
        if (config_.sdmoe)
            moe_.emplace_back(rng, config_.experts, config_.d_s, config_.gru_hidden);
        else
            encoders_.emplace_back(rng, config_.d_s, config_.gru_hidden, config_.d_s);
    }

    Rng fusion_rng(derive_seed(init_seed, "student.hcmf"));
    if (config_.hcmf)
        fusion_ = Hcmf(fusion_rng, config_, mods, config_.branches);
    else
        concat_ = ConcatFusion(fusion_rng, config_, mods.size());

    Rng cls_rng(derive_seed(init_seed, "student.classifier"));
    classifier_ = Linear(cls_rng, config_.d_s, config_.num_classes);

    if (config_.ikd) {
        const std::size_t width = config_.teacher_width == 0 ? config_.d_s : config_.teacher_width;
        // Identity start when widths agree.
        std::vector<double> eye(config_.d_s * width, 0.0);
        for (std::size_t i = 0; i < std::min(config_.d_s, width); ++i)
            eye[i * width + i] = 1.0;
        adapter_.weight = Tensor::from({config_.d_s, width}, std::move(eye), true);
        adapter_.bias = constant_param({1, width}, 0.0);
    }
}

StudentOutput StudentModel::forward(const DialogueRecord& dialogue, Mode mode, std::uint64_t noise_seed) const
{
    const RoutingOptions routing{config_.tau, config_.alpha, config_.one_sided};
    const std::string& mods = config_.modalities;
    StudentOutput out;
    std::vector<std::pair<char, Tensor>> streams;
    for (std::size_t k = 0; k < mods.size(); ++k) {
        const char m = mods[k];
        const Tensor embedded = embed_modality(dialogue, embedding_, m);
        if (config_.sdmoe) {
            auto moe = moe_[k].forward(embedded, routing, mode, derive_seed(noise_seed, std::string(1, m)));
            streams.emplace_back(m, moe.output);
            out.gates.emplace_back(m, std::move(moe.gate));
        } else {
            streams.emplace_back(m, encoders_[k](embedded));
        }
    }
    out.features = config_.hcmf ? fusion_.forward(streams).fused : concat_.forward(streams);
    out.logits = classifier_(out.features);
    return out;
}

Tensor StudentModel::adapt(const Tensor& features) const
{
    if (!has_adapter())
        throw ContractError("student was built without distillation; no adapter");
    return adapter_(features);
}

ParamList StudentModel::parameters() const
{
    ParamList out;
    embedding_.collect(out, "student.embedding");
    for (std::size_t k = 0; k < moe_.size(); ++k)
        moe_[k].collect(out, std::string("student.sdmoe.") + config_.modalities[k]);
    for (std::size_t k = 0; k < encoders_.size(); ++k)
        encoders_[k].collect(out, std::string("student.encoder.") + config_.modalities[k]);
    if (config_.hcmf)
        fusion_.collect(out, "student.hcmf");
    else
        concat_.collect(out, "student.concat");
    classifier_.collect(out, "student.classifier");
    if (has_adapter())
        adapter_.collect(out, "student.adapter");
    return out;
}

} // namespace summer
