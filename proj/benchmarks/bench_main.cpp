#include "summer/optim.hpp"
#include "summer/train.hpp"

#include <benchmark/benchmark.h>

using namespace summer;

namespace {

Tensor random_matrix(Rng& rng, std::size_t r, std::size_t c)
{
    std::vector<double> v(r * c);
    for (auto& x : v)
        x = rng.normal();
    return Tensor::from({r, c}, v);
}

void BM_Matmul(benchmark::State& state)
{
    const auto n = static_cast<std::size_t>(state.range(0));
    Rng rng(1);
    const auto a = random_matrix(rng, n, n), b = random_matrix(rng, n, n);
    for (auto _ : state)
        benchmark::DoNotOptimize(matmul(a, b).values().data());
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Matmul)->RangeMultiplier(2)->Range(16, 128)->Complexity();

void BM_MatmulBackward(benchmark::State& state)
{
    const auto n = static_cast<std::size_t>(state.range(0));
    Rng rng(2);
    auto a = random_matrix(rng, n, n);
    a.set_requires_grad(true);
    const auto b = random_matrix(rng, n, n);
    for (auto _ : state) {
        backward(sum(matmul(a, b)));
        a.zero_grad();
    }
}
BENCHMARK(BM_MatmulBackward)->Arg(32)->Arg(64);

void BM_StudentForward(benchmark::State& state)
{
    ModelConfig cfg;
    cfg.d_t = 32;
    cfg.d_a = 16;
    cfg.d_v = 16;
    cfg.d_s = static_cast<std::size_t>(state.range(0));
    cfg.d_head = cfg.d_s / cfg.heads;
    cfg.gru_hidden = cfg.d_s;
    cfg.ffn_hidden = 2 * cfg.d_s;
    cfg.fusion_layers = 2;
    cfg.teacher_width = cfg.d_s;
    const auto data = generate_synthetic(cfg, 3);
    const StudentModel student(cfg, 4);
    for (auto _ : state)
        benchmark::DoNotOptimize(student.forward(data[0], Mode::Eval, 0).logits.values().data());
}
BENCHMARK(BM_StudentForward)->Arg(16)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_StudentTrainStep(benchmark::State& state)
{
    ModelConfig cfg;
    cfg.d_t = 32;
    cfg.d_a = 16;
    cfg.d_v = 16;
    cfg.d_s = 16;
    cfg.d_head = 4;
    cfg.gru_hidden = 16;
    cfg.ffn_hidden = 32;
    cfg.fusion_layers = 1;
    cfg.teacher_width = cfg.d_s;
    const auto data = generate_synthetic(cfg, 5);
    TeacherModel teacher(cfg, 6);
    teacher.freeze();
    const StudentModel student(cfg, 7);
    Adam adam(student.parameters(), {cfg.lr});
    const Batch batch{&data[0], &data[1]};
    std::uint64_t step = 0;
    for (auto _ : state) {
        backward(student_loss(student, &teacher, batch, Mode::Train, ++step).total);
        adam.step();
    }
}
BENCHMARK(BM_StudentTrainStep)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
