//! Scene files: pretty-printed JSON of [`Scene`], validated on load.

use std::path::Path;

use jcas_core::scenario::Scene;

use crate::error::{read_string, write, Result};

pub fn save_scene(scene: &Scene, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(scene)?;
    text.push('\n');
    write(path, text.as_bytes())
}

pub fn parse_scene(text: &str) -> Result<Scene> {
    let scene: Scene = serde_json::from_str(text)?;
    scene.validate()?;
    Ok(scene)
}

pub fn load_scene(path: &Path) -> Result<Scene> {
    parse_scene(&read_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use jcas_core::scenario::{generate_scene, SceneParams};

    #[test]
    fn round_trip_and_validation() {
        let scene = generate_scene(&SceneParams::default(), 3).unwrap();
        let text = serde_json::to_string(&scene).unwrap();
        assert_eq!(parse_scene(&text).unwrap(), scene);
        let no_users = text.replace(
            &serde_json::to_string(&scene.user_positions).unwrap(),
            "[]",
        );
        assert!(parse_scene(&no_users).is_err());
        assert!(parse_scene("{\"bs_position\":1}").is_err());
    }
}
