#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "srlab/bench.hpp"

namespace srlab {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kHeader = "run_id,problem,variant,method,init,seed,mse,r2,ted,size,train_time_s,expr_raw,expr_canonical";
constexpr std::size_t kColumns = 13;

double parse_double(std::string_view s, char const* what)
{
    double v = 0.0;
    auto const [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw std::invalid_argument(std::string("records: bad ") + what + " '" + std::string(s) + "'");
    return v;
}

template <class Int>
Int parse_int(std::string_view s, char const* what)
{
    Int v = 0;
    auto const [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty())
        throw std::invalid_argument(std::string("records: bad ") + what + " '" + std::string(s) + "'");
    return v;
}

// RFC-4180 rows; accepts LF or CRLF line ends.
std::vector<std::vector<std::string>> parse_csv(std::string_view text)
{
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false, any = false;
    auto end_field = [&] {
        row.push_back(std::move(field));
        field.clear();
    };
    auto end_row = [&] {
        end_field();
        rows.push_back(std::move(row));
        row.clear();
        any = false;
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        char const c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                }
                else quoted = false;
            }
            else field += c;
            continue;
        }
        any = true;
        if (c == '"') quoted = true;
        else if (c == ',') end_field();
        else if (c == '\n') end_row();
        else if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') continue;
        else field += c;
    }
    if (quoted) throw std::invalid_argument("records: unterminated quoted field");
    if (any || !field.empty()) end_row();
    return rows;
}

std::string number(double v) { return format_double(v); }

} // namespace

std::string_view record_csv_header() { return kHeader; }

std::string csv_quote(std::string const& s)
{
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string record_csv_line(RunRecord const& r)
{
    std::string line;
    line += csv_quote(r.run_id) + ",";
    line += csv_quote(r.problem) + ",";
    line += csv_quote(r.variant) + ",";
    line += csv_quote(r.method) + ",";
    line += csv_quote(r.init) + ",";
    line += std::to_string(r.seed) + ",";
    line += number(r.mse) + ",";
    line += (r.r2 ? number(*r.r2) : std::string()) + ",";
    line += std::to_string(r.ted) + ",";
    line += std::to_string(r.size) + ",";
    line += number(r.train_time_s) + ",";
    line += csv_quote(r.expr_raw) + ",";
    line += csv_quote(r.expr_canonical) + "\n";
    return line;
}

std::string records_to_csv(std::vector<RunRecord> const& records)
{
    std::string out(kHeader);
    out += "\n";
    for (auto const& r : records) out += record_csv_line(r);
    return out;
}

std::vector<RunRecord> records_from_csv(std::string_view text)
{
    auto const rows = parse_csv(text);
    if (rows.empty()) throw std::invalid_argument("records: missing header");
    std::string header;
    for (std::size_t i = 0; i < rows[0].size(); ++i) header += (i ? "," : "") + rows[0][i];
    if (header != kHeader) throw std::invalid_argument("records: unexpected header '" + header + "'");

    std::vector<RunRecord> out;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        auto const& f = rows[i];
        if (f.size() != kColumns)
            throw std::invalid_argument("records: row " + std::to_string(i) + " has " + std::to_string(f.size()) +
                                        " fields, expected " + std::to_string(kColumns));
        RunRecord r;
        r.run_id = f[0];
        r.problem = f[1];
        r.variant = f[2];
        r.method = f[3];
        r.init = f[4];
        r.seed = parse_int<std::uint64_t>(f[5], "seed");
        r.mse = parse_double(f[6], "mse");
        if (!f[7].empty()) r.r2 = parse_double(f[7], "r2");
        r.ted = parse_int<long>(f[8], "ted");
        r.size = parse_int<long>(f[9], "size");
        r.train_time_s = parse_double(f[10], "train_time_s");
        r.expr_raw = f[11];
        r.expr_canonical = f[12];
        out.push_back(std::move(r));
    }
    return out;
}

// JSON has no infinity; non-finite reals are written as strings.
namespace {

nlohmann::ordered_json real_json(double v)
{
    if (std::isfinite(v)) return v;
    return number(v);
}

double real_from_json(nlohmann::json const& v, char const* what)
{
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) return parse_double(v.get<std::string>(), what);
    throw std::invalid_argument(std::string("records: bad ") + what);
}

} // namespace

std::string records_to_json(std::vector<RunRecord> const& records)
{
    auto arr = nlohmann::ordered_json::array();
    for (auto const& r : records) {
        nlohmann::ordered_json o;
        o["run_id"] = r.run_id;
        o["problem"] = r.problem;
        o["variant"] = r.variant;
        o["method"] = r.method;
        o["init"] = r.init;
        o["seed"] = r.seed;
        o["mse"] = real_json(r.mse);
        o["r2"] = r.r2 ? real_json(*r.r2) : nlohmann::ordered_json(nullptr);
        o["ted"] = r.ted;
        o["size"] = r.size;
        o["train_time_s"] = real_json(r.train_time_s);
        o["expr_raw"] = r.expr_raw;
        o["expr_canonical"] = r.expr_canonical;
        arr.push_back(std::move(o));
    }
    return arr.dump(1) + "\n";
}

std::vector<RunRecord> records_from_json(std::string_view text)
{
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    }
    catch (nlohmann::json::parse_error const& e) {
        throw std::invalid_argument(std::string("records: ") + e.what());
    }
    if (!j.is_array()) throw std::invalid_argument("records: expected a JSON array");
    std::vector<RunRecord> out;
    try {
        for (auto const& o : j) {
            RunRecord r;
            r.run_id = o.at("run_id").get<std::string>();
            r.problem = o.at("problem").get<std::string>();
            r.variant = o.at("variant").get<std::string>();
            r.method = o.at("method").get<std::string>();
            r.init = o.at("init").get<std::string>();
            r.seed = o.at("seed").get<std::uint64_t>();
            r.mse = real_from_json(o.at("mse"), "mse");
            if (!o.at("r2").is_null()) r.r2 = real_from_json(o.at("r2"), "r2");
            r.ted = o.at("ted").get<long>();
            r.size = o.at("size").get<long>();
            r.train_time_s = real_from_json(o.at("train_time_s"), "train_time_s");
            r.expr_raw = o.at("expr_raw").get<std::string>();
            r.expr_canonical = o.at("expr_canonical").get<std::string>();
            out.push_back(std::move(r));
        }
    }
    catch (nlohmann::json::exception const& e) {
        throw std::invalid_argument(std::string("records: ") + e.what());
    }
    return out;
}

void export_records(std::vector<RunRecord> const& records, StoreFormat format, fs::path const& path)
{
    if (records.empty()) throw std::invalid_argument("export_records: no records");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("export_records: cannot open " + path.string());
    out << (format == StoreFormat::Csv ? records_to_csv(records) : records_to_json(records));
    if (!out) throw std::runtime_error("export_records: write failed for " + path.string());
}

std::vector<RunRecord> load_records(fs::path const& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("records: cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    if (path.extension() == ".json") return records_from_json(ss.str());
    return records_from_csv(ss.str());
}

} // namespace srlab
