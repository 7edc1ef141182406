//! On-disk artifacts: `.sftp` soft predictions and PNG label maps.

pub mod label;
pub mod soft;

pub use label::{
    colorize, decode_labelmap, encode_colorized, encode_labelmap, encode_rgb, read_labelmap,
    write_colorized, write_labelmap,
};
pub use soft::{decode_soft, encode_soft, read_soft, read_soft_with, write_soft, ReadOptions, SoftFile};
