#include <ostream>

#include "gradlite/harness.hpp"

namespace gradlite {

namespace {

MemoryRow finish(MemoryRow row) {
    row.total = row.backward_signal + row.jacobian_cache + row.factor + row.accumulator +
                row.optimizer_state + row.parameters;
    return row;
}

}  // namespace

const MemoryRow& MemoryReport::row(const std::string& method) const {
    for (const MemoryRow& r : rows) {
        if (r.method == method) {
            return r;
        }
    }
    throw ConfigError("memory report has no row '" + method + "'");
}

double MemoryReport::saving(const std::string& method, const std::string& baseline) const {
    return 1.0 - row(method).total / row(baseline).total;
}

MemoryReport memory_account(const ProblemSpec& problem, const OptimizerSpec& optimizer) {
    optimizer.validate();
    const ProblemShape shape = shape_of(problem);
    const Index m = shape.signal_dim;
    const Index d = shape.param_dim();
    const double md = static_cast<double>(m) * static_cast<double>(d);
    const double tau = static_cast<double>(optimizer.tau);

    MemoryReport report;
    report.signal_dim = m;
    report.param_dim = d;
    report.blocks = static_cast<Index>(shape.block_sizes.size());
    report.k = optimizer.k;
    report.tau = optimizer.tau;

    // Per-block ranks and factor sizes.
    double signal = 0.0;
    double factor_scalars = 0.0;
    for (Index size : shape.block_sizes) {
        const Index full = std::min(m, size);
        const Index k = optimizer.full_rank ? full : optimizer.k;
        if (k > full) {
            throw RankError("rank " + std::to_string(k) + " exceeds min(m, d) = " +
                            std::to_string(full) + " for a parameter block");
        }
        signal += static_cast<double>(k);
        factor_scalars += static_cast<double>((m + size) * k);
    }
    const double accumulator = optimizer.ef_mode == EfMode::off ? 0.0 : static_cast<double>(d);
    const Index galore_k = std::min(optimizer.k, d);

    MemoryRow sgd{"sgd"};
    sgd.backward_signal = static_cast<double>(m);
    sgd.jacobian_cache = md;
    sgd.parameters = static_cast<double>(d);
    report.rows.push_back(finish(sgd));

    MemoryRow adam = sgd;
    adam.method = "adam";
    adam.optimizer_state = 2.0 * static_cast<double>(d);
    adam.resident = 2 * d;
    report.rows.push_back(finish(adam));

    MemoryRow galore = sgd;
    galore.method = "galore";
    const Index galore_resident = (galore_k < d ? d * galore_k : 0) + optimizer.tau * d;
    galore.optimizer_state = static_cast<double>(galore_resident);
    galore.resident = galore_resident;
    report.rows.push_back(finish(galore));

    MemoryRow lite{"gradlite"};
    lite.backward_signal = signal;
    lite.jacobian_cache = md / tau;
    lite.factor = factor_scalars / tau;
    lite.accumulator = accumulator;
    lite.parameters = static_cast<double>(d);
    lite.resident = static_cast<Index>(factor_scalars) + static_cast<Index>(accumulator);
    report.rows.push_back(finish(lite));

    MemoryRow probed = lite;
    probed.method = "gradlite-exact-probe";
    probed.jacobian_cache = md;
    report.rows.push_back(finish(probed));
    return report;
}

void write_memory_report(const MemoryReport& report, std::ostream& out) {
    out << "signal_dim=" << report.signal_dim << " param_dim=" << report.param_dim
        << " blocks=" << report.blocks << " k=" << report.k << " tau=" << report.tau << '\n';
    out << "method,backward_signal,jacobian_cache,factor,accumulator,optimizer_state,parameters,"
           "total,resident\n";
    for (const MemoryRow& r : report.rows) {
        out << r.method << ',' << format_number(r.backward_signal) << ','
            << format_number(r.jacobian_cache) << ',' << format_number(r.factor) << ','
            << format_number(r.accumulator) << ',' << format_number(r.optimizer_state) << ','
            << format_number(r.parameters) << ',' << format_number(r.total) << ',' << r.resident
            << '\n';
    }
    const double ratio = report.row("gradlite").backward_signal / report.row("sgd").backward_signal;
    out << "signal_ratio=" << format_number(ratio) << '\n';
    out << "saving_vs_sgd=" << format_number(report.saving("gradlite", "sgd")) << '\n';
}

}  // namespace gradlite
