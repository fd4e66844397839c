#include "commvec/embed.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <thread>

#include "commvec/binary_io.hpp"
#include "commvec/common.hpp"

namespace commvec::embed {

namespace {

constexpr std::string_view kMagic = "CVEMB001";

// Plain or relaxed-atomic access to shared parameters. The concurrent mode
// races by design (Hogwild); atomic_ref keeps those races defined.
template <bool Concurrent>
struct Access {
    static double load(const double& x) noexcept {
        if constexpr (Concurrent) {
            return std::atomic_ref<double>(const_cast<double&>(x)).load(std::memory_order_relaxed);
        } else {
            return x;
        }
    }
    static void store(double& x, double v) noexcept {
        if constexpr (Concurrent) {
            std::atomic_ref<double>(x).store(v, std::memory_order_relaxed);
        } else {
            x = v;
        }
    }
};

template <bool Concurrent>
double update_range(EmbeddingState& s, std::span<const TrainingEntry> entries, std::span<const std::size_t> order,
                    const EmbedConfig& config) {
    using A = Access<Concurrent>;
    const std::size_t dim = s.dim;
    const double lr = config.learning_rate;
    std::vector<double> grad_main(dim);
    std::vector<double> grad_ctx(dim);
    double total = 0.0;

    for (const auto idx : order) {
        const auto& e = entries[idx];
        double* w = s.main.data() + static_cast<std::size_t>(e.row) * dim;
        double* c = s.context.data() + static_cast<std::size_t>(e.col) * dim;
        double* w_sq = s.main_sq.data() + static_cast<std::size_t>(e.row) * dim;
        double* c_sq = s.context_sq.data() + static_cast<std::size_t>(e.col) * dim;
        double& bw = s.main_bias[e.row];
        double& bc = s.context_bias[e.col];

        double dot = 0.0;
        for (std::size_t d = 0; d < dim; ++d) dot += A::load(w[d]) * A::load(c[d]);
        // Biases are summed first so that exchanging the main and context
        // roles reproduces this value bit for bit.
        const double diff = dot + (A::load(bw) + A::load(bc)) - std::log(e.value);
        const double f = weight(e.value, config);
        const double cost = f * diff * diff;
        if (!std::isfinite(cost)) {
            throw TrainingError("non-finite cost at entry (" + std::to_string(e.row) + ", " + std::to_string(e.col) +
                                ") with count " + std::to_string(e.value),
                                e.row, e.col);
        }
        total += cost;

        const double fdiff = f * diff;
        for (std::size_t d = 0; d < dim; ++d) {
            grad_main[d] = fdiff * A::load(c[d]);
            grad_ctx[d] = fdiff * A::load(w[d]);
        }
        for (std::size_t d = 0; d < dim; ++d) {
            const double gw = grad_main[d];
            const double gc = grad_ctx[d];
            A::store(w[d], A::load(w[d]) - lr * gw / std::sqrt(A::load(w_sq[d])));
            A::store(c[d], A::load(c[d]) - lr * gc / std::sqrt(A::load(c_sq[d])));
            A::store(w_sq[d], A::load(w_sq[d]) + gw * gw);
            A::store(c_sq[d], A::load(c_sq[d]) + gc * gc);
        }
        double& bw_sq = s.main_bias_sq[e.row];
        double& bc_sq = s.context_bias_sq[e.col];
        A::store(bw, A::load(bw) - lr * fdiff / std::sqrt(A::load(bw_sq)));
        A::store(bc, A::load(bc) - lr * fdiff / std::sqrt(A::load(bc_sq)));
        A::store(bw_sq, A::load(bw_sq) + fdiff * fdiff);
        A::store(bc_sq, A::load(bc_sq) + fdiff * fdiff);
        if (!std::isfinite(A::load(bw)) || !std::isfinite(A::load(bc))) {
            throw TrainingError("non-finite parameter after entry (" + std::to_string(e.row) + ", " +
                                std::to_string(e.col) + ")",
                                e.row, e.col);
        }
    }
    return total;
}

void require(bool ok, const char* message) {
    if (!ok) throw std::invalid_argument(message);
}

}  // namespace

void EmbedConfig::validate() const {
    require(dim >= 1, "embedding dim must be >= 1");
    require(learning_rate > 0.0 && std::isfinite(learning_rate), "learning rate must be positive");
    require(x_max > 0.0, "x_max must be positive");
    require(alpha > 0.0 && alpha <= 1.0, "alpha must lie in (0, 1]");
}

void to_json(nlohmann::json& j, const EmbedConfig& c) {
    j = {{"dim", c.dim},
         {"epochs", c.epochs},
         {"learning_rate", c.learning_rate},
         {"x_max", c.x_max},
         {"alpha", c.alpha},
         {"seed", c.seed},
         {"deterministic", c.deterministic},
         {"threads", c.threads},
         {"finalize", c.finalize == FinalVectors::sum ? "sum" : "main"}};
}

void from_json(const nlohmann::json& j, EmbedConfig& c) {
    c.dim = j.value("dim", c.dim);
    c.epochs = j.value("epochs", c.epochs);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.x_max = j.value("x_max", c.x_max);
    c.alpha = j.value("alpha", c.alpha);
    c.seed = j.value("seed", c.seed);
    c.deterministic = j.value("deterministic", c.deterministic);
    c.threads = j.value("threads", c.threads);
    const auto fin = j.value("finalize", std::string(c.finalize == FinalVectors::sum ? "sum" : "main"));
    if (fin == "sum") {
        c.finalize = FinalVectors::sum;
    } else if (fin == "main") {
        c.finalize = FinalVectors::main_only;
    } else {
        throw std::invalid_argument("finalize must be 'sum' or 'main', got '" + fin + "'");
    }
}

EmbeddingState EmbeddingState::mirrored() const {
    EmbeddingState m = *this;
    std::swap(m.main, m.context);
    std::swap(m.main_bias, m.context_bias);
    std::swap(m.main_sq, m.context_sq);
    std::swap(m.main_bias_sq, m.context_bias_sq);
    return m;
}

bool EmbeddingState::all_finite() const {
    auto finite = [](const std::vector<double>& v) {
        return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
    };
    return finite(main) && finite(context) && finite(main_bias) && finite(context_bias);
}

EmbeddingState init_state(std::size_t vocab_size, const EmbedConfig& config) {
    require(config.dim >= 1, "embedding dim must be >= 1");
    EmbeddingState s;
    s.vocab_size = vocab_size;
    s.dim = config.dim;
    const std::size_t n = vocab_size * config.dim;
    SplitMix64 rng(derive_seed(config.seed, 0));
    const double scale = 1.0 / static_cast<double>(config.dim);
    auto fill = [&](std::vector<double>& v, std::size_t count) {
        v.resize(count);
        for (auto& x : v) x = (rng.uniform() - 0.5) * scale;
    };
    fill(s.main, n);
    fill(s.context, n);
    fill(s.main_bias, vocab_size);
    fill(s.context_bias, vocab_size);
    s.main_sq.assign(n, 1.0);
    s.context_sq.assign(n, 1.0);
    s.main_bias_sq.assign(vocab_size, 1.0);
    s.context_bias_sq.assign(vocab_size, 1.0);
    return s;
}

double weight(double x, const EmbedConfig& config) {
    if (x >= config.x_max) return 1.0;
    return std::pow(x / config.x_max, config.alpha);
}

std::vector<TrainingEntry> training_entries(const cooccur::CooccurrenceMatrix& matrix) {
    std::vector<TrainingEntry> out;
    out.reserve(matrix.entries().size() * 2);
    for (const auto& e : matrix.entries()) {
        const auto v = static_cast<double>(e.count);
        out.push_back({e.i, e.j, v});
        out.push_back({e.j, e.i, v});
    }
    return out;
}

double train_epoch(EmbeddingState& state, std::span<const TrainingEntry> entries, const EmbedConfig& config,
                   std::size_t epoch_index) {
    if (entries.empty()) throw std::invalid_argument("cannot train on an empty matrix");
    for (const auto& e : entries) {
        if (e.row >= state.vocab_size || e.col >= state.vocab_size) throw std::invalid_argument("entry index out of range");
        if (e.row == e.col) throw std::invalid_argument("diagonal training entry");
        if (!(e.value > 0.0)) throw std::invalid_argument("training entries must be positive");
    }

    std::vector<std::size_t> order(entries.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    SplitMix64 rng(derive_seed(config.seed, epoch_index + 1));
    fisher_yates(order, rng);

    unsigned threads = config.deterministic ? 1u : (config.threads ? config.threads : std::thread::hardware_concurrency());
    threads = std::clamp<unsigned>(threads, 1u, static_cast<unsigned>(std::max<std::size_t>(1, order.size() / 64)));
    if (threads == 1) return update_range<false>(state, entries, order, config);

    std::vector<double> partial(threads, 0.0);
    std::vector<std::exception_ptr> failures(threads);
    const std::size_t chunk = (order.size() + threads - 1) / threads;
    {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) {
            const auto begin = std::min(order.size(), t * chunk);
            const auto end = std::min(order.size(), begin + chunk);
            pool.emplace_back([&, t, begin, end] {
                try {
                    partial[t] = update_range<true>(state, entries, std::span(order).subspan(begin, end - begin), config);
                } catch (...) {
                    failures[t] = std::current_exception();
                }
            });
        }
    }
    for (const auto& f : failures) {
        if (f) std::rethrow_exception(f);
    }
    double total = 0.0;
    for (double p : partial) total += p;
    return total;
}

// -------------------------------------------------------- EmbeddingMatrix

EmbeddingMatrix::EmbeddingMatrix(std::vector<std::string> names, std::size_t dim, std::vector<double> values)
    : names_(std::move(names)), dim_(dim), values_(std::move(values)) {
    if (values_.size() != names_.size() * dim_) throw std::invalid_argument("embedding value count does not match shape");
    for (double v : values_) {
        if (!std::isfinite(v)) throw std::invalid_argument("non-finite embedding value");
    }
}

std::optional<std::size_t> EmbeddingMatrix::find(std::string_view name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - names_.begin());
}

std::string EmbeddingMatrix::to_text() const {
    std::string out = std::to_string(names_.size()) + " " + std::to_string(dim_) + "\n";
    char buf[32];
    for (std::size_t i = 0; i < names_.size(); ++i) {
        out += names_[i];
        for (double v : row(i)) {
            std::snprintf(buf, sizeof buf, " %.9g", v);
            out += buf;
        }
        out += '\n';
    }
    return out;
}

EmbeddingMatrix EmbeddingMatrix::from_text(std::string_view text) {
    std::size_t pos = 0;
    auto next_line = [&]() -> std::optional<std::string_view> {
        if (pos >= text.size()) return std::nullopt;
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        auto line = text.substr(pos, end - pos);
        pos = end + 1;
        return line;
    };
    auto header = next_line();
    if (!header) throw FormatError("embedding text: empty file");
    const auto head = split(trim(*header), ' ');
    std::size_t count = 0;
    std::size_t dim = 0;
    if (head.size() != 2 || std::from_chars(head[0].data(), head[0].data() + head[0].size(), count).ec != std::errc{} ||
        std::from_chars(head[1].data(), head[1].data() + head[1].size(), dim).ec != std::errc{}) {
        throw FormatError("embedding text: bad header line");
    }
    std::vector<std::string> names;
    std::vector<double> values;
    names.reserve(count);
    values.reserve(count * dim);
    for (std::size_t i = 0; i < count; ++i) {
        auto line = next_line();
        if (!line) throw FormatError("embedding text: expected " + std::to_string(count) + " rows, got " + std::to_string(i));
        const auto fields = split(trim(*line), ' ');
        if (fields.size() != dim + 1) throw FormatError("embedding text: row " + std::to_string(i + 1) + " has wrong width");
        names.push_back(fields[0]);
        for (std::size_t d = 1; d <= dim; ++d) {
            try {
                std::size_t used = 0;
                values.push_back(std::stod(fields[d], &used));
                if (used != fields[d].size()) throw std::invalid_argument("trailing");
            } catch (const std::exception&) {
                throw FormatError("embedding text: bad number '" + fields[d] + "' in row " + std::to_string(i + 1));
            }
        }
    }
    try {
        return EmbeddingMatrix(std::move(names), dim, std::move(values));
    } catch (const std::invalid_argument& e) {
        throw FormatError(std::string("embedding text: ") + e.what());
    }
}

std::string EmbeddingMatrix::to_binary() const {
    ByteWriter payload;
    for (const auto& n : names_) payload.str(n);
    for (double v : values_) payload.f64(v);
    ByteWriter header;
    header.raw(kMagic);
    header.u64(names_.size());
    header.u64(dim_);
    header.u64(checksum_bytes(payload.bytes()));
    return header.take() + payload.take();
}

EmbeddingMatrix EmbeddingMatrix::from_binary(std::string_view bytes) {
    ByteReader header(bytes, "embedding binary");
    if (header.raw(kMagic.size()) != kMagic) throw FormatError("embedding binary: bad magic");
    const auto count = header.u64();
    const auto dim = header.u64();
    const auto expected = header.u64();
    const auto payload = bytes.substr(header.offset());
    if (checksum_bytes(payload) != expected) throw FormatError("embedding binary: checksum mismatch");
    ByteReader in(payload, "embedding binary");
    std::vector<std::string> names;
    for (std::uint64_t i = 0; i < count; ++i) names.push_back(in.str());
    std::vector<double> values;
    values.reserve(count * dim);
    for (std::uint64_t i = 0; i < count * dim; ++i) values.push_back(in.f64());
    if (!in.at_end()) throw FormatError("embedding binary: trailing bytes");
    return EmbeddingMatrix(std::move(names), dim, std::move(values));
}

void EmbeddingMatrix::save(const std::filesystem::path& path) const {
    write_file(path, path.extension() == ".bin" ? to_binary() : to_text());
}

EmbeddingMatrix EmbeddingMatrix::load(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    if (bytes.compare(0, kMagic.size(), kMagic) == 0) return from_binary(bytes);
    return from_text(bytes);
}

EmbeddingMatrix finalize(const EmbeddingState& state, std::vector<std::string> names, FinalVectors mode) {
    if (names.size() != state.vocab_size) throw std::invalid_argument("name count does not match state");
    std::vector<double> values = state.main;
    if (mode == FinalVectors::sum) {
        for (std::size_t k = 0; k < values.size(); ++k) values[k] += state.context[k];
    }
    return EmbeddingMatrix(std::move(names), state.dim, std::move(values));
}

TrainResult train(const cooccur::CooccurrenceMatrix& matrix, const EmbedConfig& config) {
    config.validate();
    auto state = init_state(matrix.size(), config);
    const auto entries = training_entries(matrix);
    TrainResult out;
    out.loss_trace.reserve(config.epochs);
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        try {
            out.loss_trace.push_back(train_epoch(state, entries, config, epoch));
        } catch (const TrainingError& e) {
            std::string where;
            if (e.row() != TrainingError::npos) {
                where = " (" + matrix.vocab()[e.row()] + ", " + matrix.vocab()[e.col()] + ")";
            }
            throw TrainingError("epoch " + std::to_string(epoch) + where + ": " + e.what(), e.row(), e.col());
        }
    }
    out.embeddings = finalize(state, matrix.vocab(), config.finalize);
    return out;
}

}  // namespace commvec::embed
