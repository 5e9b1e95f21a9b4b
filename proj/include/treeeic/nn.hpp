#pragma once

#include <filesystem>
#include <vector>

#include "treeeic/dataset.hpp"
#include "treeeic/groupwise.hpp"
#include "treeeic/numkernel.hpp"

/**
 * @file nn.hpp
 *
 * @brief View-specific autoencoders with Student-t clustering heads, trained by Adam.
 */
namespace treeeic {

enum class Activation { relu, linear };

/// y = act(x * weight + bias). `weight` is in_dim x out_dim, `bias` is 1 x out_dim.
struct DenseLayer {
    Matrix weight;
    Matrix bias;
    Activation activation = Activation::linear;
};

struct Mlp {
    std::vector<DenseLayer> layers;

    int input_dim() const { return layers.empty() ? 0 : static_cast<int>(layers.front().weight.rows()); }
    int output_dim() const { return layers.empty() ? 0 : static_cast<int>(layers.back().weight.cols()); }
    Matrix forward(const Matrix& x) const;
};

/// Glorot-uniform weights and zero biases. Hidden layers use ReLU, the last layer is linear.
Mlp make_mlp(const std::vector<int>& dims, RngStream& rng);

/// Hidden widths of the encoder (the decoder mirrors them) and the embedding width.
struct Architecture {
    std::vector<int> hidden = {500, 500, 2000};
    int embed_dim = 128;
};

/// Moment buffers for every parameter of a ViewModel, in parameter-list order.
struct AdamState {
    std::vector<Matrix> m;
    std::vector<Matrix> v;
    long step = 0;
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct ViewModel {
    Mlp encoder;
    Mlp decoder;
    Matrix centroids;  // K x embed_dim
    AdamState adam;

    int input_dim() const { return encoder.input_dim(); }
    int embed_dim() const { return encoder.output_dim(); }
    int n_clusters() const { return static_cast<int>(centroids.rows()); }
};

ViewModel make_view_model(int input_dim, int n_clusters, const Architecture& arch, RngStream& rng,
                          double learning_rate = 1e-4);

/// Relabel clusters: new centroid row a is old row order[a]. Adam moments of the centroids follow.
void permute_clusters(ViewModel& model, const std::vector<int>& order);

/// Every trainable matrix of `model`: encoder (W, b)*, decoder (W, b)*, centroids.
std::vector<Matrix*> parameter_list(ViewModel& model);
std::vector<const Matrix*> parameter_list(const ViewModel& model);

/// Same layout as parameter_list, holding dL/dparam.
struct ViewGradients {
    std::vector<Matrix> params;

    static ViewGradients zeros_like(const ViewModel& model);
    void scale(double c);
};

Matrix encode(const ViewModel& model, const Matrix& x);
Matrix decode(const ViewModel& model, const Matrix& z);

/// Student-t (one degree of freedom) assignment of each row of z to each centroid.
Matrix soft_assign(const Matrix& z, const Matrix& centroids);

/**
 * Backpropagate dL/dq through soft_assign.
 * Returns dL/dz and accumulates dL/dcentroids into `d_centroids`.
 */
Matrix soft_assign_backward(const Matrix& z, const Matrix& centroids, const Matrix& q, const Matrix& dq,
                            Matrix& d_centroids);

/// Embeddings of the samples observed in view v, written into an N x d matrix (zero rows where missing).
Matrix embed_observed(const ViewModel& model, const Matrix& x, const MaskMatrix& mask, std::size_t v);

/// Soft assignments of observed samples in view v as an N x K matrix (zero rows where missing).
Matrix assign_observed(const ViewModel& model, const Matrix& x, const MaskMatrix& mask, std::size_t v);

/// Sum over views and observed samples of the squared reconstruction error.
double reconstruction_loss(const std::vector<ViewModel>& models, const MultiViewDataset& ds, const MaskMatrix& mask);

/// Which terms of rec + lambda_cons * cons + lambda_disc * disc are active.
struct LossSpec {
    double lambda_rec = 1.0;
    double lambda_cons = 0.0;
    double lambda_disc = 0.0;
    double temperature = 1.0;
};

/// Unweighted loss terms for one view on one batch.
struct ViewLoss {
    double rec = 0.0;
    double cons = 0.0;
    double disc = 0.0;
};

/**
 * Loss and analytic gradient for one view on one batch.
 *
 * `x` holds the batch rows observed in this view. `teacher`, when non-null, holds the ensemble
 * rows for the same samples and enables the consistency and discrimination terms. Gradients of
 * the weighted total are accumulated into `grad` when it is non-null.
 */
ViewLoss backward(const ViewModel& model, const Matrix& x, const Matrix* teacher, const LossSpec& spec,
                  ViewGradients* grad, Diagnostics* diag = nullptr);

/// One bias-corrected Adam update over every parameter.
void adam_step(ViewModel& model, const ViewGradients& grad);

struct PretrainOptions {
    int epochs = 200;
    int batch_size = 256;
};

/**
 * Reconstruction-only training of every view model on its observed samples.
 * Returns the summed reconstruction loss of each epoch.
 */
std::vector<double> pretrain(std::vector<ViewModel>& models, const MultiViewDataset& ds, const MaskMatrix& mask,
                             const PretrainOptions& opts, RngStream& rng);

/// Set each view's centroids to K-means centres of its observed embeddings.
void init_centroids(std::vector<ViewModel>& models, const MultiViewDataset& ds, const MaskMatrix& mask, int k,
                    RngStream& rng, const KMeansOptions& opts = {});

/// Binary checkpoint of all view models, Adam state included. Loading restores every double bit-exactly.
void save_checkpoint(const std::filesystem::path& path, const std::vector<ViewModel>& models);
std::vector<ViewModel> load_checkpoint(const std::filesystem::path& path);

}  // namespace treeeic
