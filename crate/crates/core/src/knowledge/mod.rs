//! External knowledge as categorical feature ids; internal knowledge as
//! similarity-ranked triplets.

mod taxonomy;
mod triplets;

pub use taxonomy::{build_feature_ids, FeatureIds, Taxonomy};
pub use triplets::{
    rank_neighbors, rank_neighbors_to_depth, sample_triplet, triplet_rng, Metric, Neighbor, Triplet, TripletIndex,
};
