#pragma once

#include <stdexcept>

#include "stfmri/dataset.hpp"

namespace stfmri {

class RankDeficientDesign : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Double-gamma HRF h(t) = g(t; a1, b1) - c * g(t; a2, b2), g the gamma density
/// with shape a and scale b (seconds).
struct HrfSpec {
    double peak_shape = 6.0;
    double undershoot_shape = 16.0;
    double peak_scale = 1.0;
    double undershoot_scale = 1.0;
    double undershoot_ratio = 1.0 / 6.0;
    double support_seconds = 32.0;

    void validate() const;
};

/// Samples h at t = 0, tr, 2 tr, ... <= support_seconds, scaled to max 1.
VectorXd canonical_hrf(double tr_seconds, const HrfSpec& spec = {});

/// Causal convolution truncated to the stimulus length:
/// x[t] = sum_{k=0}^{t} h[k] s[t-k] (0-based).
VectorXd bold_regressor(const VectorXd& h, const VectorXd& stimulus);

/// Column indices of the T x 6 mean design.
namespace design_col {
inline constexpr int intercept = 0;
inline constexpr int session1 = 1;
inline constexpr int session2 = 2;
inline constexpr int session_time = 3;
inline constexpr int task_bold = 4;  // X1 = h * S1
inline constexpr int rest_bold = 5;  // X2 = h * S2
}  // namespace design_col

/// T x 6 design: intercept, session-1 and session-2 indicators (session 3 is
/// baseline), within-session time (t - start)/length in [0, 1), X1, X2.
/// Requires exactly three sessions; throws RankDeficientDesign otherwise or
/// when the columns are linearly dependent.
MatrixXd design_matrix(const BlockDesign& design, const VectorXd& hrf);

}  // namespace stfmri
