#include <charconv>
#include <fstream>
#include <sstream>

#include "simgat/io.hpp"

namespace simgat::io {

std::size_t CsvTable::column(std::string_view name) const {
    for (std::size_t c = 0; c < header.size(); ++c)
        if (header[c] == name) return c;
    throw ValidationError(source.string() + ": missing column '" + std::string(name) + "'");
}

std::string CsvTable::where(std::size_t row) const { return source.string() + ":" + std::to_string(lines[row]); }

namespace {

std::vector<std::string> split_record(const std::string& line, const std::string& where) {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                field += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(field));
            field.clear();
        } else {
            field += c;
        }
    }
    if (quoted) throw ValidationError(where + ": unterminated quoted field");
    out.push_back(std::move(field));
    return out;
}

std::string quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
    return out + "\"";
}

std::ifstream open_in(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + path.string());
    return in;
}

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + path.string());
    return out;
}

}  // namespace

CsvTable read_csv(const fs::path& path) {
    auto in = open_in(path);
    CsvTable t;
    t.source = path;
    std::string line;
    std::size_t lineno = 0;
    IssueList issues;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (lineno == 1 && line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
        if (line.empty()) continue;
        const std::string where = path.string() + ":" + std::to_string(lineno);
        auto fields = split_record(line, where);
        if (t.header.empty()) {
            t.header = std::move(fields);
            continue;
        }
        if (fields.size() != t.header.size()) {
            issues.add(where + ": expected " + std::to_string(t.header.size()) + " fields, found " +
                       std::to_string(fields.size()));
            continue;
        }
        t.rows.push_back(std::move(fields));
        t.lines.push_back(lineno);
    }
    if (t.header.empty()) issues.add(path.string() + ": missing header");
    issues.throw_if_any();
    return t;
}

void write_csv(const fs::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
    auto out = open_out(path);
    auto emit = [&](const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) out << (i ? "," : "") << quote(fields[i]);
        out << '\n';
    };
    emit(header);
    for (const auto& r : rows) emit(r);
}

Json read_json(const fs::path& path) {
    auto in = open_in(path);
    try {
        return Json::parse(in);
    } catch (const Json::exception& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

void write_json(const fs::path& path, const Json& j) {
    auto out = open_out(path);
    out << j.dump(2) << '\n';
}

double parse_double(std::string_view text, const std::string& where) {
    double v = 0.0;
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end || text.empty())
        throw ValidationError(where + ": '" + std::string(text) + "' is not a number");
    return v;
}

std::int64_t parse_int(std::string_view text, const std::string& where) {
    std::int64_t v = 0;
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end || text.empty())
        throw ValidationError(where + ": '" + std::string(text) + "' is not an integer");
    return v;
}

bool parse_bool(std::string_view text, const std::string& where) {
    if (text == "1" || text == "true" || text == "True" || text == "TRUE") return true;
    if (text == "0" || text == "false" || text == "False" || text == "FALSE") return false;
    throw ValidationError(where + ": '" + std::string(text) + "' is not a boolean");
}

}  // namespace simgat::io
