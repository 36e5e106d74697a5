#include "cplab/kernels/api.hpp"

// Baseline backend: the float instantiation of the reference templates.

namespace cplab::kernels {

const FloatOps& scalar_float_ops() {
    static const FloatOps ops = {
        "scalar",
        &ref::conv3d_forward<float>,
        &ref::conv3d_backward_weights<float>,
        &ref::rowfma<float>,
        &ref::scale<float>,
        &ref::axpb<float>,
        &ref::dot<float>,
        &ref::sum<float>,
        &ref::sumsq<float>,
        &ref::elu_forward<float>,
        &ref::elu_backward<float>,
    };
    return ops;
}

}  // namespace cplab::kernels
