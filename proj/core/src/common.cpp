#include "collossl/common.hpp"

#include <cstdio>
#include <cstdlib>

namespace collossl {

std::string format_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    // Prefer the shortest representation that round-trips.
    for (int prec = 1; prec <= 16; ++prec) {
        char tmp[64];
        std::snprintf(tmp, sizeof(tmp), "%.*g", prec, v);
        if (std::strtod(tmp, nullptr) == v) return tmp;
    }
    return buf;
}

double parse_real(const std::string& s, const std::string& context) {
    const char* begin = s.c_str();
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0') {
        throw DataError("invalid number '" + s + "' in " + context);
    }
    return v;
}

long long parse_int(const std::string& s, const std::string& context) {
    const char* begin = s.c_str();
    char* end = nullptr;
    long long v = std::strtoll(begin, &end, 10);
    if (end == begin || *end != '\0') {
        throw DataError("invalid integer '" + s + "' in " + context);
    }
    return v;
}

}  // namespace collossl
