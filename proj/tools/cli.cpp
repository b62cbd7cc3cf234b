#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <iterator>
#include <map>
#include <memory>
#include <sstream>

#include "udfvault/bench.hpp"
#include "udfvault/container.hpp"
#include "udfvault/csv_output.hpp"
#include "udfvault/error.hpp"
#include "udfvault/hosted.hpp"
#include "udfvault/trust.hpp"
#include "udfvault/udf/engine.hpp"

namespace udfvault::cli {

namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail(Errc::IoError, "cannot read " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path store_root(const std::string& flag)
{
    return flag.empty() ? trust::TrustStore::default_root() : fs::path(flag);
}

udf::Engine make_engine(const fs::path& root)
{
    auto hosted = std::make_shared<udf::HostedRegistry>();
    hosted::register_builtins(*hosted);
    return udf::Engine(udf::BackendRegistry::with_defaults(hosted), trust::TrustStore::open(root));
}

struct Options {
    std::string store;

    std::string file;
    std::string dataset;

    // attach
    std::string backend;
    std::string source;
    std::string dtype;
    std::string shape;
    std::vector<std::string> inputs;
    bool embed_source = false;

    // read
    std::string format = "csv";

    // keys
    std::string key_file;
    std::string key_id;
    std::string profile;

    // create-sample
    std::uint64_t n = 0;
    std::uint64_t seed = bench::kDefaultSeed;

    // bench
    bench::BenchConfig bench;
    std::string bench_out;
};

int do_attach(const Options& o, std::ostream& out)
{
    udf::AttachRequest req;
    req.source = slurp(o.source);
    req.backend = o.backend;
    req.output_path = o.dataset;
    req.output_dtype = DType::from_name(o.dtype);
    req.output_shape = parse_shape(o.shape);
    req.embed_source = o.embed_source;
    for (const auto& spec : o.inputs) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size())
            fail(Errc::InvalidArgument, "--input expects alias=dspath, got '" + spec + "'");
        req.inputs.emplace_back(spec.substr(0, eq), spec.substr(eq + 1));
    }
    const fs::path root = store_root(o.store);
    auto engine = make_engine(root);
    const auto signer = trust::ensure_keypair(root, trust::default_owner());
    auto c = Container::open(o.file, Container::Mode::ReadWrite);
    const auto meta = engine.attach(c, req, signer);
    out << "attached " << meta.output_dataset << " (" << meta.backend << ", " << meta.bytecode_size
        << " byte object, signed by " << signer.record.id() << ")\n";
    return kOk;
}

int do_read(const Options& o, std::ostream& out)
{
    auto engine = make_engine(store_root(o.store));
    auto c = Container::open(o.file);
    engine.bind(c);
    const DatasetMeta meta = c.dataset(o.dataset);
    const DataBuffer data = c.read_dataset(meta.path);
    if (o.format == "raw")
        out.write(reinterpret_cast<const char*>(data.bytes.data()), static_cast<std::streamsize>(data.bytes.size()));
    else
        write_csv(out, data, meta.dtype, meta.shape);
    return kOk;
}

int do_inspect(const Options& o, std::ostream& out)
{
    auto engine = make_engine(store_root(o.store));
    auto c = Container::open(o.file);
    const auto r = engine.inspect(c, o.dataset);
    nlohmann::ordered_json doc;
    doc["dataset"] = c.dataset(o.dataset).path;
    doc["header"] = nlohmann::json::parse(r.header);
    doc["bytecode_size"] = r.meta.bytecode_size;
    nlohmann::ordered_json v;
    v["signature_valid"] = r.signature_valid;
    v["status"] = r.verification;
    v["key_id"] = r.key_id;
    v["profile"] = r.profile ? nlohmann::ordered_json(*r.profile) : nlohmann::ordered_json(nullptr);
    doc["verification"] = v;
    out << doc.dump(2) << '\n';
    return kOk;
}

int do_keys_list(const Options& o, std::ostream& out)
{
    auto store = trust::TrustStore::open(store_root(o.store));
    for (const auto& k : store.keys()) {
        out << k.record.id() << '\t' << k.profile << '\t' << k.record.owner_name;
        if (!k.record.owner_email.empty())
            out << " <" << k.record.owner_email << '>';
        out << '\n';
    }
    return kOk;
}

int do_keys_import(const Options& o, std::ostream& out)
{
    auto store = trust::TrustStore::open(store_root(o.store));
    const auto record = trust::KeyRecord::from_json(slurp(o.key_file));
    const auto stored = store.import_key(record, o.profile.empty() ? trust::kUntrusted : o.profile);
    out << "imported " << stored.record.id() << " into " << stored.profile << '\n';
    return kOk;
}

int do_keys_move(const Options& o, std::ostream& out)
{
    auto store = trust::TrustStore::open(store_root(o.store));
    const auto stored = store.move_key(o.key_id, o.profile);
    out << "moved " << stored.record.id() << " to " << stored.profile << '\n';
    return kOk;
}

int do_create_sample(const Options& o, std::ostream& out)
{
    auto c = Container::create(o.file);
    bench::gen_bands(c, o.n, o.seed);
    out << "wrote /Band4 and /Band5 (" << o.n << "x" << o.n << " int16) to " << o.file << '\n';
    return kOk;
}

int do_bench(const Options& o, std::ostream& out, std::ostream& err)
{
    auto config = o.bench;
    config.log = &err;
    const auto report = bench::run_bench(config);
    if (o.bench_out.empty()) {
        out << report.to_csv();
    } else {
        std::ofstream f(o.bench_out, std::ios::binary);
        f << report.to_csv();
        if (!f)
            fail(Errc::IoError, "cannot write " + o.bench_out);
        err << "report written to " << o.bench_out << '\n';
    }
    for (const auto& m : report.mismatches)
        err << "error: value equivalence failed: " << m << '\n';
    return report.mismatches.empty() ? kOk : kOperational;
}

} // namespace

int run(std::vector<std::string> args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Storage-embedded user-defined functions for SDC1 containers", "udfvault"};
    app.require_subcommand(1);
    Options o;
    app.add_option("--store", o.store, "Trust store root (default: $UDFVAULT_HOME or ~/.udfvault)");

    auto* attach = app.add_subcommand("attach", "Compile, sign and store a UDF dataset");
    attach->add_option("FILE", o.file)->required();
    attach->add_option("--backend", o.backend, "expr or hosted")->required();
    attach->add_option("--source", o.source, "File holding the UDF source")->required();
    attach->add_option("--output", o.dataset, "Dataset path to create")->required();
    attach->add_option("--dtype", o.dtype, "Output element type, e.g. float64")->required();
    attach->add_option("--shape", o.shape, "Output shape, e.g. 1440x720")->required();
    attach->add_option("--input", o.inputs, "alias=dspath, repeatable");
    attach->add_flag("--embed-source", o.embed_source, "Keep the source text in the header");

    auto* read = app.add_subcommand("read", "Write dataset values to stdout");
    read->add_option("FILE", o.file)->required();
    read->add_option("DSPATH", o.dataset)->required();
    read->add_option("--format", o.format)->check(CLI::IsMember({"raw", "csv"}));

    auto* inspect = app.add_subcommand("inspect", "Show a UDF header and its verification status without running it");
    inspect->add_option("FILE", o.file)->required();
    inspect->add_option("DSPATH", o.dataset)->required();

    auto* keys = app.add_subcommand("keys", "Manage the trust store");
    keys->require_subcommand(1);
    auto* keys_list = keys->add_subcommand("list", "List keys by profile");
    auto* keys_import = keys->add_subcommand("import", "Import a public key file");
    keys_import->add_option("KEYFILE", o.key_file)->required();
    keys_import->add_option("--profile", o.profile, "Target profile (default: untrusted)");
    auto* keys_move = keys->add_subcommand("move", "Move a key to another profile");
    keys_move->add_option("KEYID", o.key_id, "Key id or unique prefix")->required();
    keys_move->add_option("PROFILE", o.profile)->required();

    auto* sample = app.add_subcommand("create-sample", "Write deterministic Band4/Band5 grids to a new file");
    sample->add_option("FILE", o.file)->required();
    sample->add_option("--n", o.n, "Grid side")->required()->check(CLI::PositiveNumber);
    sample->add_option("--seed", o.seed);

    auto* benchc = app.add_subcommand("bench", "Compare stored grids against UDF datasets");
    benchc->add_option("--max-n", o.bench.max_n, "Skip sizes above this");
    benchc->add_option("--sizes", o.bench.sizes, "Grid sides to run")->delimiter(',');
    benchc->add_option("--out", o.bench_out, "CSV report path (default: stdout)");
    benchc->add_option("--scratch", o.bench.scratch_dir, "Directory for the bench files");
    benchc->add_option("--chunk-cols", o.bench.chunk_cols, "Columns per compressed chunk")->check(CLI::PositiveNumber);
    benchc->add_option("--deflate-level", o.bench.deflate_level)->check(CLI::Range(0, 9));
    const std::map<std::string, filters::DeflateStrategy> strategies{{"default", filters::DeflateStrategy::Default},
                                                                     {"huffman", filters::DeflateStrategy::HuffmanOnly},
                                                                     {"rle", filters::DeflateStrategy::Rle}};
    benchc->add_option("--deflate-strategy", o.bench.deflate_strategy, "default, huffman or rle")
        ->transform(CLI::CheckedTransformer(strategies, CLI::ignore_case));
    benchc->add_option("--seed", o.bench.seed);
    benchc->add_flag("--keep", o.bench.keep_files, "Keep the bench files");

    try {
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << '\n';
        err << "run 'udfvault --help' for the command list\n";
        return kUsage;
    }

    try {
        if (*attach)
            return do_attach(o, out);
        if (*read)
            return do_read(o, out);
        if (*inspect)
            return do_inspect(o, out);
        if (*keys_list)
            return do_keys_list(o, out);
        if (*keys_import)
            return do_keys_import(o, out);
        if (*keys_move)
            return do_keys_move(o, out);
        if (*sample)
            return do_create_sample(o, out);
        if (*benchc)
            return do_bench(o, out, err);
    } catch (const Error& e) {
        err << "error: " << errc_name(e.code()) << ": " << e.what() << '\n';
        return kOperational;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kOperational;
    }
    return kUsage;
}

} // namespace udfvault::cli
