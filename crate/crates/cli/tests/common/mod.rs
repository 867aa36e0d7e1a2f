#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lungcnn::data::synthetic::write_quadrant_tree;

pub fn lungcnn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lungcnn"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// A synthetic image tree under `root/data` and a config pointing at it.
/// `small` selects 16x16 images and a one-stage model for speed; otherwise
/// the default 64x64 network is used.
pub fn setup(root: &Path, per_class: usize, small: bool) -> PathBuf {
    let size = if small { 16 } else { 64 };
    write_quadrant_tree(&root.join("data"), per_class, size, 7).unwrap();
    let mut text = String::from("data_root = \"data\"\noutput_dir = \"run\"\n");
    if small {
        text.push_str(
            "[preprocess]\nsize = 16\n\n[model]\ninput_size = 16\nin_channels = 1\nhidden = 16\nclasses = 4\n\
             [[model.conv]]\nfilters = 4\nkernel = 3\n",
        );
    }
    let path = root.join("config.toml");
    fs::write(&path, text).unwrap();
    path
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}
