#pragma once

#include <span>

#include "moosurr/linalg.hpp"

namespace moosurr {

enum class LossKind { MSE, BinaryCrossEntropy, PointFidelity, Distill };

/// Probabilities fed to binary cross-entropy are clamped to this margin.
inline constexpr double kBceClamp = 1e-12;

/// Batch-mean predictive loss. Only MSE and BinaryCrossEntropy are valid here.
double loss_pred(std::span<const double> outputs, std::span<const double> targets, LossKind kind);

/// Batch mean of (f - g)^2.
double loss_point_fidelity(std::span<const double> f_out, std::span<const double> g_out);

/// Batch mean of (teacher - student)^2.
double loss_distill(std::span<const double> teacher_out, std::span<const double> student_out);

/// Dispatch on kind; for PointFidelity/Distill `targets` is the other model's output.
double loss_value(std::span<const double> outputs, std::span<const double> targets, LossKind kind);

/// d(batch-mean loss)/d(outputs[i]). For PointFidelity and Distill the
/// derivative is taken w.r.t. the first argument (f, or the student).
Vector upstream_derivative(std::span<const double> outputs, std::span<const double> targets,
                           LossKind kind);

}  // namespace moosurr
