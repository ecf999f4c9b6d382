#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dfeia_core::network::NetworkConfig;
use dfeia_core::verify::overfit::{CLASSES, IMAGE_SIZE, PER_CLASS};
use dfeia_core::verify::synthetic::class_coloured_noise;

/// `root/class_<c>/img_<i>.png`, 8 classes of 4 class-coloured noise images.
pub fn synthetic_folder(root: &Path, seed: u64) -> PathBuf {
    for c in 0..CLASSES {
        let dir = root.join(format!("class_{c}"));
        std::fs::create_dir_all(&dir).unwrap();
        for i in 0..PER_CLASS {
            let px = class_coloured_noise(c, i, IMAGE_SIZE, seed);
            let img = image::RgbImage::from_raw(IMAGE_SIZE as u32, IMAGE_SIZE as u32, px).unwrap();
            img.save(dir.join(format!("img_{i}.png"))).unwrap();
        }
    }
    root.to_path_buf()
}

/// The reduced network written as a config file.
pub fn reduced_config(dir: &Path) -> PathBuf {
    let path = dir.join("reduced.json");
    dfeia::config::save(&NetworkConfig::reduced(), &path).unwrap();
    path
}

pub fn dfeia(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dfeia")).args(args).output().expect("binary runs")
}

pub fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|e| panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&out.stdout)))
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}
