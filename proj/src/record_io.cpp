#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "gmsynth/error.hpp"
#include "gmsynth/records.hpp"

namespace gmsynth {

namespace fs = std::filesystem;
using nlohmann::json;

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomic(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write '" + tmp.string() + "'");
        out << text;
        if (!out) throw DataError("write failed for '" + tmp.string() + "'");
    }
    fs::rename(tmp, path);
}

namespace {

RecordFormat resolve(const fs::path& path, RecordFormat fmt) {
    if (fmt != RecordFormat::Auto) return fmt;
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".json" ? RecordFormat::Json : RecordFormat::Csv;
}

AccelRecord record_from_json(const std::string& text, const std::string& fallback_id) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(std::string("invalid record JSON: ") + e.what());
    }
    AccelRecord r;
    try {
        r.id = j.value("id", fallback_id);
        if (!j.contains("samples")) throw DataError("record JSON lacks 'samples'");
        for (const auto& v : j.at("samples")) {
            if (v.is_null()) throw DataError("record JSON has a null sample");
            r.samples.push_back(v.get<double>());
        }
        if (j.contains("meta"))
            for (auto it = j["meta"].begin(); it != j["meta"].end(); ++it)
                r.meta[it.key()] = it.value().is_string() ? it.value().get<std::string>() : it.value().dump();
        const bool have_dt = j.contains("dt");
        if (have_dt) r.dt = j.at("dt").get<double>();
        if (j.contains("times")) {
            const auto times = j.at("times").get<std::vector<double>>();
            if (times.size() != r.samples.size()) throw DataError("time and sample arrays differ in length");
            if (times.size() >= 2) {
                const double step = (times.back() - times.front()) / static_cast<double>(times.size() - 1);
                for (std::size_t i = 1; i < times.size(); ++i)
                    if (std::abs(times[i] - (times.front() + step * static_cast<double>(i))) > 1e-9)
                        throw DataError("non-uniform time step in record '" + r.id + "'");
                if (have_dt && std::abs(step - r.dt) > 1e-9) throw DataError("dt disagrees with times");
                if (!have_dt) r.dt = step;
            }
        } else if (!have_dt) {
            throw DataError("record JSON lacks 'dt'");
        }
    } catch (const json::exception& e) {
        throw DataError(std::string("invalid record JSON: ") + e.what());
    }
    try {
        r.validate();
    } catch (const ValidationError& e) {
        throw DataError(e.what());
    }
    return r;
}

}  // namespace

AccelRecord load_record(const fs::path& path, RecordFormat fmt) {
    const std::string text = read_file(path);
    const std::string stem = path.stem().string();
    return resolve(path, fmt) == RecordFormat::Json ? record_from_json(text, stem) : record_from_csv(text, stem);
}

void save_record(const AccelRecord& rec, const fs::path& path, RecordFormat fmt) {
    rec.validate();
    if (resolve(path, fmt) == RecordFormat::Json) {
        json j;
        j["id"] = rec.id;
        j["dt"] = rec.dt;
        j["samples"] = rec.samples;
        j["meta"] = rec.meta;
        write_file_atomic(path, j.dump(1) + "\n");
    } else {
        write_file_atomic(path, record_to_csv(rec));
    }
}

std::vector<fs::path> list_record_files(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw DataError("not a directory: '" + dir.string() + "'");
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        const auto ext = e.path().extension().string();
        if (ext == ".csv" || ext == ".json") out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace gmsynth
