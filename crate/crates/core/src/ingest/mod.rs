//! Dataset I/O, holdout simulation and splitting.

mod csv_io;
mod simulate;
mod split;

pub use csv_io::{
    format_time, load_coordinates, load_csv, load_truth, read_coordinates, read_csv, read_truth,
    save_csv, save_truth, write_csv, write_matrix, write_truth, CsvSchema, COORDS_HEADER,
    DATA_HEADER, TRUTH_HEADER,
};
pub use simulate::{
    holdout_month_copy, holdout_position_copy, month_rows, simulate_missing, Mechanism, MissingSpec,
    Period,
};
pub use split::{choose_validation, split, valid_label_centers, Split, SplitSpec};
