#include "topoflow/attention.hpp"

namespace topoflow::attn {

template Mat<float> attend(const Mat<float>&, const AttentionParams<float>&, const Mat<float>*, const Mat<float>*,
                           AttentionCache<float>*);
template Mat<double> attend(const Mat<double>&, const AttentionParams<double>&, const Mat<double>*,
                            const Mat<double>*, AttentionCache<double>*);
template void attend_backward(const Mat<double>&, const AttentionParams<double>&, const AttentionCache<double>&,
                              AttentionGrads<double>&, bool);

}  // namespace topoflow::attn
