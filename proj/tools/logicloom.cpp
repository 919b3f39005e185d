// logicloom command-line tool.
//
// Exit codes: 0 success, 1 input or structural error, 2 execution or model error.

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "logicloom/augment.hpp"
#include "logicloom/error.hpp"
#include "logicloom/jointtrain.hpp"
#include "logicloom/lf.hpp"
#include "logicloom/metrics.hpp"
#include "logicloom/model.hpp"
#include "logicloom/pipeline.hpp"
#include "logicloom/synthetic.hpp"

using namespace logicloom;

namespace {

constexpr int kOk = 0;
constexpr int kInput = 1;
constexpr int kExec = 2;

std::string read_text(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw InputError("cannot read " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw InputError("cannot read " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

nlohmann::json read_json_file(const std::string& path) {
    try {
        return nlohmann::json::parse(read_text(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw InputError(path + ": " + e.what());
    }
}

// A single table from a CSV file, a table object, or a collection of tables
// (array, {"tables": [...]}, or a corpus) narrowed by `id`.
Table load_one_table(const std::string& path, const std::string& id) {
    if (std::filesystem::path(path).extension() == ".csv") return load_csv_table(path);
    auto j = read_json_file(path);
    if (j.is_object() && j.contains("columns")) {
        if (!j.contains("id")) j["id"] = std::filesystem::path(path).stem().string();
        return table_from_json(j);
    }
    Corpus c = load_tables(path, TableFormat::json);
    if (id.empty()) {
        if (c.tables.size() != 1) throw InputError(path + " holds " + std::to_string(c.tables.size()) + " tables; pass --table-id");
        return c.tables.begin()->second;
    }
    return c.table(id);
}

std::map<std::string, Table> load_table_map(const std::string& path) {
    if (std::filesystem::is_directory(path)) return load_tables(path, TableFormat::csv_dir).tables;
    if (std::filesystem::path(path).extension() == ".csv") {
        Table t = load_csv_table(path);
        return {{t.id(), t}};
    }
    return load_tables(path, TableFormat::json).tables;
}

std::string lf_source(const std::string& text, const std::string& file) {
    if (!file.empty()) return read_text(file);
    if (text.empty()) throw InputError("give a logical form or --file");
    return text;
}

void print_parse_error(const ParseError& e, std::string_view src) {
    std::cerr << "error: " << e.what() << "\n";
    std::string line(src.substr(0, src.find('\n')));
    if (e.offset() <= line.size()) {
        std::cerr << "  " << line << "\n  " << std::string(e.offset(), ' ')
                  << std::string(std::max<std::size_t>(1, e.length()), '^') << "\n";
    }
}

int cmd_lf_parse(const std::string& text, const std::string& file, bool json) {
    std::string src = lf_source(text, file);
    try {
        LfNode ast = parse_lf(src);
        std::string printed = print_lf(ast);
        if (json) {
            std::cout << nlohmann::json{{"canonical", printed}, {"depth", lf_depth(ast)},
                                        {"topic", std::string(to_string(classify_lf_topic(ast)))}}
                             .dump()
                      << "\n";
        } else {
            std::cout << printed << "\n";
        }
        return kOk;
    } catch (const ParseError& e) {
        print_parse_error(e, src);
        return kInput;
    }
}

int cmd_lf_validate(const std::string& text, const std::string& file, const std::string& table_path,
                    const std::string& table_id) {
    std::string src = lf_source(text, file);
    LfNode ast;
    try {
        ast = parse_lf(src);
    } catch (const ParseError& e) {
        print_parse_error(e, src);
        return kInput;
    }
    std::optional<Table> table;
    if (!table_path.empty()) table = load_one_table(table_path, table_id);
    auto report = validate_lf(ast, table ? &*table : nullptr);
    std::cout << report.to_json().dump() << "\n";
    return report.table_valid() ? kOk : kInput;
}

int cmd_lf_exec(const std::string& text, const std::string& file, const std::string& table_path,
                const std::string& table_id) {
    std::string src = lf_source(text, file);
    Table table = load_one_table(table_path, table_id);
    LfNode ast;
    try {
        ast = parse_lf(src);
    } catch (const ParseError& e) {
        print_parse_error(e, src);
        return kInput;
    }
    auto report = validate_lf(ast, table);
    if (!report.table_valid()) {
        std::cerr << "error: invalid logical form\n" << report.to_json().dump() << "\n";
        return kInput;
    }
    try {
        std::cout << exec_value_to_json(execute_lf(ast, table)).dump() << "\n";
        return kOk;
    } catch (const ExecError& e) {
        std::cerr << "error: " << to_string(e.kind()) << ": " << e.what() << "\n";
        std::cout << nlohmann::json{{"error", std::string(to_string(e.kind()))}, {"message", e.what()}}.dump() << "\n";
        return kExec;
    }
}

struct EvalArgs {
    std::string text_pred, text_gold, lf_pred, lf_gold, tables, table_ids, tokenizer = "metric", exec_mode = "truthy",
                                                                         out;
};

int cmd_eval(const EvalArgs& a) {
    bool text = !a.text_pred.empty() || !a.text_gold.empty();
    bool lf = !a.lf_pred.empty() || !a.lf_gold.empty();
    if (!text && !lf) throw InputError("give --text-pred/--text-gold and/or --lf-pred/--lf-gold");
    std::vector<std::string> tp, tg, lp, lg;
    auto aligned = [](const std::string& p, const std::string& g, std::vector<std::string>& pv,
                      std::vector<std::string>& gv) {
        if (p.empty() || g.empty()) throw InputError("predictions and golds must be given together");
        pv = read_lines(p);
        gv = read_lines(g);
        if (pv.size() != gv.size()) {
            throw InputError("misaligned files: " + p + " has " + std::to_string(pv.size()) + " lines, " + g + " has " +
                             std::to_string(gv.size()));
        }
    };
    if (text) aligned(a.text_pred, a.text_gold, tp, tg);
    if (lf) aligned(a.lf_pred, a.lf_gold, lp, lg);

    std::map<std::string, Table> tables;
    std::vector<const Table*> table_refs;
    bool exec = lf && !a.tables.empty();
    if (exec) {
        if (a.table_ids.empty()) throw InputError("--tables needs --table-ids (one table id per LF line)");
        tables = load_table_map(a.tables);
        auto ids = read_lines(a.table_ids);
        if (ids.size() != lp.size()) throw InputError("misaligned files: --table-ids does not match the LF files");
        for (const auto& id : ids) {
            auto it = tables.find(trim(id));
            if (it == tables.end()) throw InputError("unknown table id '" + id + "'");
            table_refs.push_back(&it->second);
        }
    } else {
        table_refs.assign(lp.size(), nullptr);
    }
    auto tokenizer = make_tokenizer(a.tokenizer);
    EvalBundle b = evaluate_all(tp, tg, lp, lg, table_refs, *tokenizer, exec_mode_from_string(a.exec_mode));
    nlohmann::json j = b.to_json();
    if (!text) {
        for (const char* k : {"bleu4", "rouge1", "rouge2", "rouge4", "rougeL"}) j[k] = nullptr;
    }
    if (!lf) j["lf_acc"] = nullptr;
    if (!exec) j["exec_acc"] = nullptr;
    std::cout << b.to_table();
    std::cout << j.dump() << "\n";
    if (!a.out.empty()) {
        std::ofstream os(a.out);
        if (!os) throw InputError("cannot write " + a.out);
        os << j.dump(2) << "\n";
    }
    return kOk;
}

struct AnnotateArgs {
    std::string input, tables, model = "retrieval", load, train_corpus, out;
    int beam = 3;
};

int cmd_annotate(const AnnotateArgs& a) {
    auto tables = load_table_map(a.tables);
    struct Row {
        std::string table_id, text;
        LogicType type;
    };
    std::vector<Row> rows;
    std::size_t n = 0;
    for (const auto& line : read_lines(a.input)) {
        ++n;
        if (trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
            Row r{j.at("table_id").get<std::string>(), j.at("text").get<std::string>(), LogicType::count};
            r.type = j.contains("logic_type") ? logic_type_from_string(j["logic_type"].get<std::string>())
                                              : classify_text_topic(r.text);
            if (!tables.count(r.table_id)) throw InputError("unknown table id '" + r.table_id + "'");
            rows.push_back(std::move(r));
        } catch (const nlohmann::json::exception& e) {
            throw InputError(a.input + ":" + std::to_string(n) + ": " + e.what());
        }
    }
    auto model = make_model(a.model);
    if (!a.load.empty()) model->load(a.load);
    if (!a.train_corpus.empty()) {
        Corpus c = corpus_from_json(read_json_file(a.train_corpus));
        auto pairs = supervised_pairs(c, Role::lg);
        model->train_weighted(pairs);
    }
    std::vector<Tokens> inputs;
    for (const auto& r : rows) inputs.push_back(serialize_input(Role::lg, r.type, tables.at(r.table_id), r.text).tokens);
    auto outs = inputs.empty() ? std::vector<Tokens>{} : model->generate(inputs, a.beam);
    if (outs.size() != rows.size()) throw ModelError("model returned the wrong number of outputs");

    std::ofstream file;
    if (!a.out.empty()) {
        file.open(a.out);
        if (!file) throw InputError("cannot write " + a.out);
    }
    std::ostream& os = a.out.empty() ? std::cout : file;
    std::size_t true_count = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const Table& table = tables.at(rows[i].table_id);
        std::string lf = to_wire(outs[i]);
        nlohmann::json line = {{"schema_version", 1}, {"table_id", rows[i].table_id}, {"text", rows[i].text},
                               {"logic_type", std::string(to_string(rows[i].type))}, {"lf", lf}};
        try {
            LfNode ast = parse_lf(lf);
            line["parseable"] = true;
            auto report = validate_lf(ast, table);
            line["table_valid"] = report.table_valid();
            if (report.table_valid()) {
                try {
                    auto v = execute_lf(ast, table);
                    line["exec_result"] = exec_value_to_json(v);
                    if (auto* b = std::get_if<bool>(&v); b && *b) ++true_count;
                } catch (const ExecError& e) {
                    line["exec_result"] = {{"error", std::string(to_string(e.kind()))}};
                }
            } else {
                line["exec_result"] = nullptr;
            }
        } catch (const ParseError&) {
            line["parseable"] = false;
            line["table_valid"] = false;
            line["exec_result"] = nullptr;
        }
        os << line.dump() << "\n";
    }
    std::cerr << "annotated " << rows.size() << " statements, " << true_count << " execute to true\n";
    return kOk;
}

int cmd_synth(std::size_t tables, std::uint64_t seed, const std::string& out) {
    SyntheticOptions opt;
    opt.tables = tables;
    opt.seed = seed;
    auto corpus = make_synthetic_corpus(opt);
    std::filesystem::create_directories(out);
    auto write = [&](const std::string& name, const nlohmann::json& j) {
        std::ofstream os(std::filesystem::path(out) / name);
        if (!os) throw InputError("cannot write " + (std::filesystem::path(out) / name).string());
        os << j.dump(1) << "\n";
    };
    write("train.json", corpus_to_json(corpus.train));
    write("validation.json", corpus_to_json(corpus.validation));
    write("test.json", corpus_to_json(corpus.test));
    nlohmann::json tables_json = nlohmann::json::array();
    for (const auto& [id, t] : corpus.tables) tables_json.push_back(table_to_json(t));
    write("tables.json", {{"schema_version", 1}, {"tables", tables_json}});
    std::cerr << "wrote " << corpus.tables.size() << " tables, " << corpus.train.instances.size() << " train / "
              << corpus.validation.instances.size() << " validation / " << corpus.test.instances.size()
              << " test instances to " << out << "\n";
    return kOk;
}

int cmd_serve(const std::string& model_desc, const std::string& load, const std::string& listen) {
    auto model = make_model(model_desc);
    if (!load.empty()) model->load(load);
    if (listen.empty()) {
        FdChannel channel(::dup(0), ::dup(1));
        serve_model(*model, channel);
        return kOk;
    }
    auto colon = listen.rfind(':');
    if (colon == std::string::npos) throw InputError("--listen expects host:port");
    auto [fd, port] = listen_tcp(listen.substr(0, colon), std::stoi(listen.substr(colon + 1)));
    std::cerr << "listening on " << listen.substr(0, colon) << ":" << port << "\n";
    for (;;) {
        auto channel = accept_tcp(fd);
        serve_model(*model, *channel);
    }
}

struct PipelineArgs {
    std::string config;
    std::string run_dir;
    std::string exec_mode;
    bool reweigh_each_epoch = false;
};

int cmd_pipeline(const PipelineArgs& args) {
    auto config = PipelineConfig::load(args.config);
    if (!args.run_dir.empty()) config.run_dir = args.run_dir;
    if (!args.exec_mode.empty()) config.exec_mode = exec_mode_from_string(args.exec_mode);
    if (args.reweigh_each_epoch) config.train.reweigh_each_epoch = true;
    auto result = run_pipeline(config, [](const std::string& msg) { std::cerr << msg << "\n"; });
    std::cout << result.test_eval.to_table();
    std::cout << nlohmann::json{{"run_dir", config.run_dir.string()},
                                {"test_eval", result.test_eval.to_json()},
                                {"resumed", result.resumed_stages}}
                     .dump()
              << "\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"logicloom: logical forms over tables, augmentation, weighting and joint training"};
    app.require_subcommand(1);

    std::function<int()> action;

    // lf
    auto* lf = app.add_subcommand("lf", "Parse, validate or execute a logical form");
    lf->require_subcommand(1);
    std::string lf_text, lf_file, table_path, table_id;
    bool json = false;
    auto* lf_parse = lf->add_subcommand("parse", "Print the canonical form");
    lf_parse->add_option("lf", lf_text, "Logical form text");
    lf_parse->add_option("--file", lf_file, "Read the logical form from a file");
    lf_parse->add_flag("--json", json, "Emit JSON");
    lf_parse->callback([&] { action = [&] { return cmd_lf_parse(lf_text, lf_file, json); }; });
    auto* lf_validate = lf->add_subcommand("validate", "Type-check, optionally against a table");
    lf_validate->add_option("lf", lf_text, "Logical form text");
    lf_validate->add_option("--file", lf_file, "Read the logical form from a file");
    lf_validate->add_option("--table", table_path, "Table (.csv or .json)");
    lf_validate->add_option("--table-id", table_id, "Table id within a multi-table file");
    lf_validate->callback([&] { action = [&] { return cmd_lf_validate(lf_text, lf_file, table_path, table_id); }; });
    auto* lf_exec = lf->add_subcommand("exec", "Execute on a table and print the value as JSON");
    lf_exec->add_option("lf", lf_text, "Logical form text");
    lf_exec->add_option("--file", lf_file, "Read the logical form from a file");
    lf_exec->add_option("--table", table_path, "Table (.csv or .json)")->required();
    lf_exec->add_option("--table-id", table_id, "Table id within a multi-table file");
    lf_exec->callback([&] { action = [&] { return cmd_lf_exec(lf_text, lf_file, table_path, table_id); }; });

    // eval
    EvalArgs ev;
    auto* eval = app.add_subcommand("eval", "Score aligned prediction/gold files (one item per line)");
    eval->add_option("--text-pred", ev.text_pred, "Predicted texts");
    eval->add_option("--text-gold", ev.text_gold, "Gold texts");
    eval->add_option("--lf-pred", ev.lf_pred, "Predicted logical forms");
    eval->add_option("--lf-gold", ev.lf_gold, "Gold logical forms");
    eval->add_option("--tables", ev.tables, "Tables for execution accuracy (.json, .csv or CSV directory)");
    eval->add_option("--table-ids", ev.table_ids, "Table id per LF line");
    eval->add_option("--tokenizer", ev.tokenizer, "metric | whitespace")->capture_default_str();
    eval->add_option("--exec-mode", ev.exec_mode, "truthy | error-free")->capture_default_str();
    eval->add_option("--out", ev.out, "Also write the JSON report here");
    eval->callback([&] { action = [&] { return cmd_eval(ev); }; });

    // pipeline
    PipelineArgs pa;
    auto* pipeline = app.add_subcommand("pipeline", "Run augment, weigh, train and evaluate from a config");
    pipeline->add_option("--config", pa.config, "Pipeline config JSON")->required();
    pipeline->add_option("--run-dir", pa.run_dir, "Override the run directory");
    pipeline->add_option("--exec-mode", pa.exec_mode, "Override exec_mode: truthy | error-free");
    pipeline->add_flag("--reweigh-each-epoch", pa.reweigh_each_epoch,
                       "Experimental: recompute weights with the teachers before every joint epoch after the first");
    pipeline->callback([&] { action = [&] { return cmd_pipeline(pa); }; });

    // annotate
    AnnotateArgs an;
    auto* annotate = app.add_subcommand("annotate", "Generate silver logical forms for (table, text) pairs");
    annotate->add_option("--input", an.input, "JSON lines with table_id, text and optional logic_type")->required();
    annotate->add_option("--tables", an.tables, "Tables (.json, .csv or CSV directory)")->required();
    annotate->add_option("--model", an.model, "LG model descriptor")->capture_default_str();
    annotate->add_option("--load", an.load, "Checkpoint to load into the model");
    annotate->add_option("--train-corpus", an.train_corpus, "Corpus JSON to train the model on first");
    annotate->add_option("--beam", an.beam, "Beam size")->capture_default_str();
    annotate->add_option("--out", an.out, "Output JSON lines (stdout by default)");
    annotate->callback([&] { action = [&] { return cmd_annotate(an); }; });

    // synth
    std::size_t synth_tables = 50;
    std::uint64_t synth_seed = 7;
    std::string synth_out;
    auto* synth = app.add_subcommand("synth", "Write a synthetic corpus (sampled LFs, template texts)");
    synth->add_option("--tables", synth_tables, "Number of tables")->capture_default_str();
    synth->add_option("--seed", synth_seed, "Random seed")->capture_default_str();
    synth->add_option("--out", synth_out, "Output directory")->required();
    synth->callback([&] { action = [&] { return cmd_synth(synth_tables, synth_seed, synth_out); }; });

    // serve
    std::string serve_model_desc = "retrieval", serve_load, serve_listen;
    auto* serve = app.add_subcommand("serve", "Serve a model over the line protocol (stdio or TCP)");
    serve->add_option("--model", serve_model_desc, "Model descriptor")->capture_default_str();
    serve->add_option("--load", serve_load, "Checkpoint to load first");
    serve->add_option("--listen", serve_listen, "host:port to listen on instead of stdio");
    serve->callback([&] { action = [&] { return cmd_serve(serve_model_desc, serve_load, serve_listen); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kInput;
    }

    try {
        return action();
    } catch (const StageError& e) {
        std::cerr << "error: stage " << e.what() << "\n";
        return e.input() ? kInput : kExec;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInput;
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInput;
    } catch (const ExecError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExec;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExec;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInput;
    }
}
