#include "evoforecast/frequency_tensor.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "evoforecast/error.hpp"
#include "text_util.hpp"

namespace evo {

std::string_view to_string(TensorKind kind) {
    switch (kind) {
    case TensorKind::ground_truth:
        return "ground_truth";
    case TensorKind::noisy:
        return "noisy";
    case TensorKind::predicted:
        return "predicted";
    }
    return "unknown";
}

TensorKind parse_tensor_kind(std::string_view text) {
    if (text == "ground_truth") return TensorKind::ground_truth;
    if (text == "noisy") return TensorKind::noisy;
    if (text == "predicted") return TensorKind::predicted;
    throw DataError("unknown tensor kind '" + std::string(text) + "'");
}

FrequencyTensor::FrequencyTensor(std::vector<int> generations, std::vector<std::size_t> snp_indices,
    std::vector<long> positions, std::size_t replicates, TensorKind kind)
    : generations_(std::move(generations)),
      snp_indices_(std::move(snp_indices)),
      positions_(std::move(positions)),
      replicates_(replicates),
      kind_(kind),
      values_(generations_.size() * snp_indices_.size() * replicates, 0.0) {
    if (positions_.size() != snp_indices_.size()) {
        throw DataError("frequency tensor: positions and snp indices differ in length");
    }
    for (std::size_t t = 1; t < generations_.size(); ++t) {
        if (generations_[t] <= generations_[t - 1]) {
            throw DataError("frequency tensor: generations must be strictly increasing");
        }
    }
}

std::size_t FrequencyTensor::time_index(int generation) const {
    auto it = std::find(generations_.begin(), generations_.end(), generation);
    if (it == generations_.end()) {
        throw DataError("generation " + std::to_string(generation) + " not present in tensor");
    }
    return static_cast<std::size_t>(it - generations_.begin());
}

bool FrequencyTensor::has_generation(int generation) const {
    return std::find(generations_.begin(), generations_.end(), generation) != generations_.end();
}

int FrequencyTensor::interval() const {
    return generations_.size() < 2 ? 0 : generations_[1] - generations_[0];
}

FrequencyTensor FrequencyTensor::slice_times(std::size_t first, std::size_t last) const {
    if (first > last || last > times()) throw DataError("frequency tensor: time slice out of range");
    FrequencyTensor out({generations_.begin() + static_cast<long>(first), generations_.begin() + static_cast<long>(last)},
        snp_indices_, positions_, replicates_, kind_);
    const std::size_t stride = snps() * replicates_;
    std::copy(values_.begin() + static_cast<long>(first * stride), values_.begin() + static_cast<long>(last * stride),
        out.values_.begin());
    return out;
}

FrequencyTensor FrequencyTensor::until_generation(int max_generation) const {
    std::size_t last = 0;
    while (last < times() && generations_[last] <= max_generation) ++last;
    return slice_times(0, last);
}

FrequencyTensor FrequencyTensor::select_rows(std::span<const std::size_t> rows) const {
    std::vector<std::size_t> idx;
    std::vector<long> pos;
    for (auto row : rows) {
        if (row >= snps()) throw DataError("frequency tensor: row out of range");
        idx.push_back(snp_indices_[row]);
        pos.push_back(positions_[row]);
    }
    FrequencyTensor out(generations_, std::move(idx), std::move(pos), replicates_, kind_);
    for (std::size_t t = 0; t < times(); ++t) {
        for (std::size_t k = 0; k < rows.size(); ++k) {
            for (std::size_t r = 0; r < replicates_; ++r) out.at(t, k, r) = at(t, rows[k], r);
        }
    }
    return out;
}

void FrequencyTensor::validate() const {
    if (values_.size() != times() * snps() * replicates_) throw DataError("frequency tensor: inconsistent shape");
    for (double v : values_) {
        if (!(v >= 0.0 && v <= 1.0)) throw DataError("frequency tensor: value outside [0,1]");
    }
}

std::string format_frequency_table(const FrequencyTensor &f) {
    std::string out = "#generations=";
    for (std::size_t t = 0; t < f.times(); ++t) {
        if (t) out += ',';
        out += std::to_string(f.generations()[t]);
    }
    out += "  replicates=" + std::to_string(f.replicates());
    out += "  kind=";
    out += to_string(f.kind());
    out += '\n';
    char buf[32];
    for (std::size_t i = 0; i < f.snps(); ++i) {
        out += std::to_string(f.snp_indices()[i]);
        out += '\t';
        out += std::to_string(f.positions()[i]);
        for (std::size_t r = 0; r < f.replicates(); ++r) {
            for (std::size_t t = 0; t < f.times(); ++t) {
                std::snprintf(buf, sizeof buf, "\t%.6f", f.at(t, i, r));
                out += buf;
            }
        }
        out += '\n';
    }
    return out;
}

void write_frequency_table(const FrequencyTensor &f, const std::filesystem::path &path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open " + path.string() + " for writing");
    os << format_frequency_table(f);
    if (!os) throw DataError("failed writing " + path.string());
}

FrequencyTensor parse_frequency_table(std::string_view text) {
    auto lines = detail::split_lines(text);
    if (lines.empty() || !lines[0].starts_with("#")) throw ParseError("missing '#generations=' header", 1);

    std::vector<int> generations;
    std::size_t replicates = 0;
    bool have_reps = false;
    TensorKind kind = TensorKind::ground_truth;
    for (auto field : detail::split_ws(lines[0].substr(1))) {
        auto eq = field.find('=');
        if (eq == std::string_view::npos) throw ParseError("malformed header field '" + std::string(field) + "'", 1);
        auto key = field.substr(0, eq);
        auto value = field.substr(eq + 1);
        if (key == "generations") {
            for (auto g : detail::split(value, ',')) {
                if (g.empty()) continue;
                generations.push_back(static_cast<int>(detail::parse_int(g, 1)));
            }
        } else if (key == "replicates") {
            replicates = static_cast<std::size_t>(detail::parse_int(value, 1));
            have_reps = true;
        } else if (key == "kind") {
            try {
                kind = parse_tensor_kind(value);
            } catch (const DataError &e) {
                throw ParseError(e.what(), 1);
            }
        } else {
            throw ParseError("unknown header field '" + std::string(key) + "'", 1);
        }
    }
    if (!have_reps) throw ParseError("header lacks replicates=", 1);
    for (std::size_t t = 1; t < generations.size(); ++t) {
        if (generations[t] <= generations[t - 1]) throw ParseError("generations not strictly increasing", 1);
    }

    const std::size_t columns = replicates * generations.size();
    std::vector<std::size_t> idx;
    std::vector<long> pos;
    std::vector<std::vector<double>> rows;
    for (std::size_t ln = 1; ln < lines.size(); ++ln) {
        auto line = lines[ln];
        if (line.empty()) continue;
        auto cells = detail::split(line, '\t');
        if (cells.size() != columns + 2) {
            throw ParseError("expected " + std::to_string(columns + 2) + " columns, found " +
                    std::to_string(cells.size()),
                ln + 1);
        }
        idx.push_back(static_cast<std::size_t>(detail::parse_int(cells[0], ln + 1)));
        pos.push_back(static_cast<long>(detail::parse_int(cells[1], ln + 1)));
        std::vector<double> vals(columns);
        for (std::size_t c = 0; c < columns; ++c) {
            double v = detail::parse_double(cells[c + 2], ln + 1);
            if (!(v >= 0.0 && v <= 1.0)) {
                throw ParseError("frequency " + std::string(cells[c + 2]) + " outside [0,1]", ln + 1);
            }
            vals[c] = v;
        }
        rows.push_back(std::move(vals));
    }

    FrequencyTensor f(std::move(generations), std::move(idx), std::move(pos), replicates, kind);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t r = 0; r < replicates; ++r) {
            for (std::size_t t = 0; t < f.times(); ++t) f.at(t, i, r) = rows[i][r * f.times() + t];
        }
    }
    return f;
}

FrequencyTensor read_frequency_table(const std::filesystem::path &path) {
    return parse_frequency_table(detail::read_file(path));
}

}  // namespace evo
