#include "rain/common.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <thread>

namespace rain {

std::string kind_name(ColumnKind k) {
    switch (k) {
    case ColumnKind::Integer: return "integer";
    case ColumnKind::Real: return "real";
    case ColumnKind::Text: return "text";
    case ColumnKind::Boolean: return "boolean";
    }
    return "?";
}

double value_as_real(const Value& v) {
    if (auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
    if (auto* d = std::get_if<double>(&v)) return *d;
    if (auto* b = std::get_if<bool>(&v)) return *b ? 1.0 : 0.0;
    throw EvalError("text value used in numeric context");
}

std::string value_to_string(const Value& v) {
    if (auto* i = std::get_if<std::int64_t>(&v)) return std::to_string(*i);
    if (auto* d = std::get_if<double>(&v)) return format_double(*d);
    if (auto* b = std::get_if<bool>(&v)) return *b ? "true" : "false";
    return std::get<std::string>(v);
}

std::string format_double(double v) {
    char buf[64];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

int thread_cap() {
    static int cap = [] {
        if (const char* env = std::getenv("RAIN_THREADS")) {
            int n = std::atoi(env);
            if (n >= 1) return n;
        }
        unsigned hc = std::thread::hardware_concurrency();
        return hc == 0 ? 1 : static_cast<int>(hc);
    }();
    return cap;
}

} // namespace rain
