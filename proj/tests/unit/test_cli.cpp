#include "helpers.hpp"

#include "json.hpp"

#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>

using summer::testing::temp_path;

namespace {

struct Result {
    int status = -1;
    std::string output;
};

Result run(const std::string& args)
{
    const std::string cmd = std::string(SUMMER_CLI_PATH) + " " + args + " 2>&1";
    Result r;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (pipe == nullptr)
        return r;
    std::array<char, 4096> buf{};
    while (std::fgets(buf.data(), buf.size(), pipe) != nullptr)
        r.output += buf.data();
    const int raw = pclose(pipe);
    r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    return r;
}

std::string read_file(const std::string& path)
{
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Small model so a full train/eval cycle runs in seconds.
std::string tiny_config()
{
    const auto path = temp_path("cli_tiny.toml");
    std::ofstream(path) << "[model]\nd_t = 5\nd_a = 4\nd_v = 6\nd_s = 6\nheads = 2\nd_head = 3\n"
                           "fusion_layers = 1\ngru_hidden = 4\nffn_hidden = 8\n"
                           "[optim]\nepochs = 2\nteacher_epochs = 2\nbatch_size = 4\n"
                           "[data]\nutterances = 40\nmin_dialogue = 3\nmax_dialogue = 5\n";
    return path;
}

} // namespace

TEST(Cli, GenDataWritesJsonl)
{
    const auto out = temp_path("cli_data.jsonl");
    const auto r = run("gen-data --config " + tiny_config() + " --out " + out);
    ASSERT_EQ(r.status, 0) << r.output;
    EXPECT_NE(r.output.find("# resolved config"), std::string::npos);
    const auto text = read_file(out);
    ASSERT_FALSE(text.empty());
    const auto first = nlohmann::json::parse(text.substr(0, text.find('\n')));
    EXPECT_TRUE(first.contains("dialogue_id"));
}

TEST(Cli, InvalidTemperatureIsUserError)
{
    const auto r = run("gen-data --out " + temp_path("x.jsonl") + " --set tau=-1");
    EXPECT_EQ(r.status, 1);
    EXPECT_NE(r.output.find("ERROR: tau must be > 0"), std::string::npos) << r.output;
}

TEST(Cli, StudentNeedsTeacherCheckpoint)
{
    const auto data = temp_path("cli_data2.jsonl");
    ASSERT_EQ(run("gen-data --config " + tiny_config() + " --out " + data).status, 0);
    const auto r = run("train-student --config " + tiny_config() + " --data " + data + " --out " +
                       temp_path("s.ckpt"));
    EXPECT_EQ(r.status, 1);
    EXPECT_NE(r.output.find("ERROR: teacher checkpoint required"), std::string::npos) << r.output;
}

TEST(Cli, TrainEvalExportCycle)
{
    const auto cfg = tiny_config();
    const auto data = temp_path("cycle.jsonl"), teacher = temp_path("t.ckpt"), student = temp_path("s.ckpt");
    const auto log = temp_path("s.jsonl"), report = temp_path("report.json"), emb = temp_path("emb.csv");
    ASSERT_EQ(run("gen-data --config " + cfg + " --out " + data).status, 0);
    auto r = run("train-teacher --config " + cfg + " --data " + data + " --out " + teacher);
    ASSERT_EQ(r.status, 0) << r.output;
    r = run("train-student --config " + cfg + " --data " + data + " --teacher-checkpoint " + teacher + " --out " +
            student + " --log " + log);
    ASSERT_EQ(r.status, 0) << r.output;

    std::istringstream lines(read_file(log));
    std::string line;
    std::size_t epochs = 0;
    while (std::getline(lines, line)) {
        const auto j = nlohmann::json::parse(line);
        EXPECT_TRUE(j.contains("l_cross") && j.contains("l_align") && j.contains("l_smooth") && j.contains("total"));
        ++epochs;
    }
    EXPECT_EQ(epochs, 2u);

    r = run("eval --checkpoint " + student + " --data " + data + " --report " + report);
    ASSERT_EQ(r.status, 0) << r.output;
    const auto j = nlohmann::json::parse(read_file(report));
    EXPECT_GE(j["w_f1"].get<double>(), 0.0);
    EXPECT_EQ(j["per_class"].size(), 6u);

    r = run("eval --checkpoint " + teacher + " --data " + data);
    EXPECT_EQ(r.status, 0) << r.output;

    r = run("export-embeddings --checkpoint " + student + " --data " + data + " --out " + emb);
    ASSERT_EQ(r.status, 0) << r.output;
    EXPECT_EQ(read_file(emb).rfind("dialogue_id,index,label,predicted,f0,", 0), 0u);
}

TEST(Cli, CorruptCheckpointIsUserError)
{
    const auto bad = temp_path("bad.ckpt");
    std::ofstream(bad) << "not a checkpoint";
    const auto data = temp_path("cli_data3.jsonl");
    ASSERT_EQ(run("gen-data --config " + tiny_config() + " --out " + data).status, 0);
    const auto r = run("eval --checkpoint " + bad + " --data " + data);
    EXPECT_EQ(r.status, 1);
    EXPECT_EQ(r.output.rfind("ERROR:", 0), 0u) << r.output;
}

TEST(Cli, HelpShowsDefaults)
{
    const auto r = run("train-student --help");
    EXPECT_EQ(r.status, 0);
    EXPECT_NE(r.output.find("--no-ikd"), std::string::npos);
    EXPECT_NE(r.output.find("[false]"), std::string::npos);
}

TEST(Cli, UnknownSubcommandFails)
{
    EXPECT_NE(run("frobnicate").status, 0);
}
