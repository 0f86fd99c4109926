#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ldl/ldl.hpp"

int main(int argc, char** argv) {
    CLI::App app{"ldl - a deductive database interpreter"};

    std::vector<std::string> program_files;
    std::string batch_file;
    std::string csv_dir = ".";
    unsigned long long seed = 0;
    long max_steps = 10000;
    bool no_offload = false;
    bool trace = false;

    app.add_option("program", program_files, "program files (.ldl or .csv) to load on startup");
    app.add_option("--batch", batch_file, "run the queries in this file and exit");
    app.add_option("--csv-dir", csv_dir, "directory holding <table>.csv for external relations");
    app.add_option("--seed", seed, "iteration seed for reproducible choice outcomes");
    app.add_option("--max-steps", max_steps, "step bound for XY evaluation");
    app.add_flag("--no-offload", no_offload, "evaluate external relations in the local store");
    app.add_flag("--trace", trace, "emit one line per get-tuple transition on stderr");

    CLI11_PARSE(app, argc, argv);

    ldl::Session::Options opts;
    opts.eval.seed = seed;
    opts.eval.max_steps = max_steps;
    opts.eval.offload = !no_offload;
    opts.eval.trace = trace;
    opts.eval.trace_out = &std::cerr;
    opts.csv_dir = csv_dir;

    if (!batch_file.empty()) {
        if (program_files.empty()) {
            std::cerr << "error: --batch needs a program file\n";
            return 1;
        }
        ldl::Session session(opts);
        try {
            for (auto& f : program_files) session.load_file(f);
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return 1;
        }
        if (!session.analyzed_ok()) {
            for (auto& d : session.diagnostics()) std::cerr << d << "\n";
            return 1;
        }
        std::ifstream queries(batch_file);
        if (!queries) {
            std::cerr << "error: cannot open query file " << batch_file << "\n";
            return 1;
        }
        ldl::CommandLoop loop(session, std::cout, std::cerr);
        int status = 0;
        std::string line;
        while (std::getline(queries, line)) {
            int st = 0;
            if (!loop.dispatch(line, st)) break;
            if (st) status = st;
        }
        return status;
    }

    ldl::Session session(opts);
    ldl::CommandLoop loop(session, std::cout, std::cerr);
    int status = 0;
    try {
        for (auto& f : program_files) {
            session.load_file(f);
            for (auto& d : session.diagnostics()) std::cerr << d << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        status = 1;
    }
    int st = loop.run(std::cin, /*interactive=*/true);
    return status ? status : st;
}
