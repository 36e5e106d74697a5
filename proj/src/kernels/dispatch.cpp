#include <cstdlib>
#include <string>

#include "cplab/errors.hpp"
#include "cplab/kernels/api.hpp"

// Runtime backend selection. This TU is compiled without SIMD flags so the
// detection code itself runs anywhere; the vector TUs are only entered
// through function pointers after the CPU check passes.

namespace cplab::kernels {

const FloatOps& scalar_float_ops();
const FloatOps& avx2_float_ops();
const FloatOps& avx512_float_ops();

namespace {

bool cpu_has(Isa isa) {
    switch (isa) {
        case Isa::scalar:
            return true;
        case Isa::avx2:
            return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
        case Isa::avx512:
            return __builtin_cpu_supports("avx512f") && __builtin_cpu_supports("avx512bw") &&
                   __builtin_cpu_supports("avx512dq") && __builtin_cpu_supports("avx512vl");
    }
    return false;
}

Isa pick_default() {
    if (const char* env = std::getenv("CPLAB_KERNELS")) {
        const std::string want(env);
        for (Isa isa : {Isa::scalar, Isa::avx2, Isa::avx512}) {
            if (want == isa_name(isa)) {
                if (!cpu_has(isa))
                    throw ConfigError("CPLAB_KERNELS=" + want + " not supported by this CPU");
                return isa;
            }
        }
        throw ConfigError("CPLAB_KERNELS='" + want + "' is not one of scalar|avx2|avx512");
    }
    if (cpu_has(Isa::avx512)) return Isa::avx512;
    if (cpu_has(Isa::avx2)) return Isa::avx2;
    return Isa::scalar;
}

Isa& active_slot() {
    static Isa isa = pick_default();
    return isa;
}

}  // namespace

const char* isa_name(Isa isa) {
    switch (isa) {
        case Isa::scalar: return "scalar";
        case Isa::avx2: return "avx2";
        case Isa::avx512: return "avx512";
    }
    return "?";
}

std::vector<Isa> supported_isas() {
    std::vector<Isa> out;
    for (Isa isa : {Isa::scalar, Isa::avx2, Isa::avx512})
        if (cpu_has(isa)) out.push_back(isa);
    return out;
}

Isa active_isa() { return active_slot(); }

void select_isa(Isa isa) {
    if (!cpu_has(isa))
        throw ConfigError(std::string("kernel backend '") + isa_name(isa) +
                          "' not supported by this CPU");
    active_slot() = isa;
}

const FloatOps& float_ops(Isa isa) {
    switch (isa) {
        case Isa::scalar: return scalar_float_ops();
        case Isa::avx2: return avx2_float_ops();
        case Isa::avx512: return avx512_float_ops();
    }
    return scalar_float_ops();
}

const FloatOps& float_ops() { return float_ops(active_slot()); }

}  // namespace cplab::kernels
