// Command-line front end: batch runs, evaluation against a gold list,
// single- vs multi-agent comparison, and the HTTP service.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "sift/error.hpp"
#include "sift/metrics.hpp"
#include "sift/server.hpp"
#include "sift/session.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunOptions {
    std::string corpus;
    std::string question;
    std::string criteria;
    std::string focus;
    std::string summarization;
    std::uint64_t seed = 42;
    int k = 0;
    int budget = 0;
    std::string out;
    std::string csv;
    std::string events;
    std::string session_dir;
    std::string interventions;
    std::string prompts;
    std::string format = "markdown";
    bool sequential = false;
};

std::string read_text(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw sift::Error(sift::ErrorCode::Io, "cannot read " + path);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::string& path, const std::string& text)
{
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw sift::Error(sift::ErrorCode::Io, "cannot write " + path);
    }
    out << text;
}

void add_run_options(CLI::App* app, RunOptions& o, bool full)
{
    app->add_option("-c,--corpus", o.corpus, "Corpus file (CSV or JSONL with id, title, abstract)")
        ->required()
        ->check(CLI::ExistingFile);
    app->add_option("-q,--question", o.question, "Research question")->required();
    app->add_option("--criteria", o.criteria, "Inclusion/exclusion criteria");
    app->add_option("--focus", o.focus, "Detailed focus");
    app->add_option("--summarization", o.summarization, "Summarization requirement");
    app->add_option("--seed", o.seed, "Random seed")->envname("SIFT_SEED");
    app->add_option("-k,--clusters", o.k, "Cluster count (default: elbow search)");
    app->add_option("-b,--budget", o.budget, "Total reads shared by all agents (default: unlimited)");
    app->add_option("--prompts", o.prompts, "Directory overriding the prompt templates")->check(CLI::ExistingDirectory);
    app->add_flag("--sequential", o.sequential, "Step agents one after another instead of in parallel");
    if (full) {
        app->add_option("-o,--out", o.out, "Report output file (default: stdout)");
        app->add_option("--format", o.format, "Report format")->check(CLI::IsMember({"markdown", "text"}));
        app->add_option("--csv", o.csv, "Write the screening export here");
        app->add_option("--events", o.events, "Write the event log here");
        app->add_option("--session-dir", o.session_dir, "Persist the session in this directory");
        app->add_option("-i,--interventions", o.interventions,
                        "JSONL script; each line is an intervention with \"agent\" and \"tick\" fields")
            ->check(CLI::ExistingFile);
    }
}

sift::SessionConfig session_config(const RunOptions& o)
{
    sift::SessionConfig c;
    c.base.research_question = o.question;
    c.base.inclusion_exclusion_criteria = o.criteria;
    c.base.detailed_focus = o.focus;
    c.base.summarization_requirement = o.summarization;
    c.seed = o.seed;
    if (o.k > 0) {
        c.k = o.k;
    }
    if (o.budget > 0) {
        c.total_budget = o.budget;
    }
    c.parallel = !o.sequential;
    return c;
}

sift::prompts::TemplateSet templates(const RunOptions& o)
{
    return o.prompts.empty() ? sift::prompts::TemplateSet::builtin() : sift::prompts::TemplateSet::load(o.prompts);
}

std::shared_ptr<sift::Provider> provider()
{
    return sift::make_provider(sift::ProviderConfig::from_environment());
}

std::unique_ptr<sift::Session> run_pipeline(const RunOptions& o)
{
    std::optional<fs::path> dir;
    if (!o.session_dir.empty()) {
        dir = o.session_dir;
    }
    auto s = std::make_unique<sift::Session>("cli", session_config(o), provider(), templates(o), dir);
    const auto ingested = s->upload_corpus(read_text(o.corpus));
    spdlog::info("ingested {} articles", ingested.at("articles").get<std::size_t>());
    const auto map = s->build_map();
    spdlog::info("map built: k={}", map.at("k").get<int>());
    s->start();

    std::vector<sift::ScriptedIntervention> script;
    if (!o.interventions.empty()) {
        script = sift::parse_intervention_script(read_text(o.interventions));
    }
    const auto ticks = sift::run_scripted(*s, std::move(script));
    spdlog::info("quiesced after {} ticks", ticks);
    return s;
}

int cmd_run(const RunOptions& o)
{
    auto s = run_pipeline(o);
    s->synthesize();
    write_text(o.out, s->report_document(o.format == "text" ? sift::ReportFormat::PlainText
                                                             : sift::ReportFormat::Markdown));
    if (!o.csv.empty()) {
        write_text(o.csv, s->export_csv());
    }
    if (!o.events.empty()) {
        write_text(o.events, s->event_log_text());
    }
    return 0;
}

int cmd_eval(const RunOptions& o, const std::string& gold_path)
{
    const auto gold = sift::read_gold(read_text(gold_path));
    auto s = run_pipeline(o);
    const auto r = sift::screening_metrics(sift::included_ids(s->corpus()), gold);
    // Inclusions reached only through Path interventions are not system credit.
    const auto sys = sift::screening_metrics(sift::system_included_ids(s->corpus(), s->agents()), gold);
    json out = {{"k", s->clusters().k},
                {"predicted", r.predicted.size()},
                {"gold", r.gold.size()},
                {"true_positives", r.true_positives},
                {"precision", r.precision},
                {"recall", r.recall},
                {"f1", r.f1},
                {"system_only",
                 {{"predicted", sys.predicted.size()},
                  {"true_positives", sys.true_positives},
                  {"precision", sys.precision},
                  {"recall", sys.recall},
                  {"f1", sys.f1}}}};
    std::cout << out.dump(2) << "\n";
    return 0;
}

int cmd_compare(const RunOptions& o, const std::string& gold_path, const std::vector<std::uint64_t>& seeds,
                const std::string& table_out)
{
    const auto gold = sift::read_gold(read_text(gold_path));
    const auto records = sift::read_records(read_text(o.corpus));
    if (o.budget <= 0) {
        throw sift::Error(sift::ErrorCode::InvalidArgument, "compare needs --budget");
    }
    const auto table = sift::compare_partitioning(records, session_config(o), gold, seeds, o.budget, provider());
    if (!table_out.empty()) {
        write_text(table_out, table.to_csv());
    }
    std::cout << table.summary();
    return 0;
}

sift::Server* g_server = nullptr;

void on_signal(int)
{
    if (g_server) {
        g_server->stop();
    }
}

int cmd_serve(const std::string& host, int port, const std::string& data_dir, const std::string& prompts_dir)
{
    std::optional<fs::path> root;
    if (!data_dir.empty()) {
        root = data_dir;
        fs::create_directories(*root);
    }
    auto tpl = prompts_dir.empty() ? sift::prompts::TemplateSet::builtin() : sift::prompts::TemplateSet::load(prompts_dir);
    auto manager = std::make_shared<sift::SessionManager>(provider(), tpl, root);
    const auto recovered = manager->recover_all();
    for (const auto& id : manager->ids()) {
        manager->get(id)->start_runner();
    }
    sift::Server server(manager);
    const int bound = server.bind(host, port);
    if (bound < 0) {
        spdlog::error("cannot bind {}:{}", host, port);
        return 1;
    }
    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    spdlog::info("listening on {}:{} ({} sessions recovered)", host, bound, recovered);
    server.listen();
    g_server = nullptr;
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"sift: steerable multi-agent screening and synthesis for systematic reviews"};
    app.require_subcommand(1);
    std::string log_level = "info";
    app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off");

    RunOptions run_opts;
    auto* run = app.add_subcommand("run", "Screen a corpus and write the synthesized report");
    add_run_options(run, run_opts, true);

    RunOptions eval_opts;
    std::string eval_gold;
    auto* eval = app.add_subcommand("eval", "Screen a corpus and score the inclusions against a gold list");
    add_run_options(eval, eval_opts, false);
    eval->add_option("-g,--gold", eval_gold, "Gold inclusion list")->required()->check(CLI::ExistingFile);
    eval->add_option("-i,--interventions", eval_opts.interventions, "JSONL intervention script, as for run")
        ->check(CLI::ExistingFile);

    RunOptions cmp_opts;
    std::string cmp_gold;
    std::string cmp_table;
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    auto* compare = app.add_subcommand("compare", "Multi-agent versus single-agent recall at equal budget");
    add_run_options(compare, cmp_opts, false);
    compare->add_option("-g,--gold", cmp_gold, "Gold inclusion list")->required()->check(CLI::ExistingFile);
    compare->add_option("--seeds", seeds, "Seeds to run")->delimiter(',');
    compare->add_option("--table", cmp_table, "Write the per-seed table as CSV");

    std::string host = "127.0.0.1";
    int port = 8080;
    std::string data_dir;
    std::string serve_prompts;
    auto* serve = app.add_subcommand("serve", "Run the HTTP service");
    serve->add_option("--host", host, "Bind address")->envname("SIFT_HOST");
    serve->add_option("-p,--port", port, "Port (0 picks a free one)")->envname("SIFT_PORT");
    serve->add_option("--data-dir", data_dir, "Persist sessions here and recover them on start");
    serve->add_option("--prompts", serve_prompts, "Directory overriding the prompt templates")
        ->check(CLI::ExistingDirectory);

    CLI11_PARSE(app, argc, argv);
    spdlog::set_level(spdlog::level::from_str(log_level));
    // Reports may go to stdout; keep logs off it.
    spdlog::set_default_logger(spdlog::stderr_color_mt("sift"));
    spdlog::set_level(spdlog::level::from_str(log_level));

    try {
        if (*run) {
            return cmd_run(run_opts);
        }
        if (*eval) {
            return cmd_eval(eval_opts, eval_gold);
        }
        if (*compare) {
            return cmd_compare(cmp_opts, cmp_gold, seeds, cmp_table);
        }
        return cmd_serve(host, port, data_dir, serve_prompts);
    } catch (const sift::Error& e) {
        spdlog::error("{}: {}", sift::to_string(e.code()), e.detail());
        return 2;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 2;
    }
}
