//! Regenerates `assets/scene256.pgm` from the procedural scene generator.

use fried_core::imaging::{save_image, textured_scene, BUNDLED_SCENE_SEED, BUNDLED_SCENE_SIZE};

fn main() -> fried_core::Result<()> {
    let scene = textured_scene(BUNDLED_SCENE_SIZE, BUNDLED_SCENE_SEED)?;
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/assets/scene256.pgm");
    save_image(&scene, path)?;
    println!("wrote {path}");
    Ok(())
}
