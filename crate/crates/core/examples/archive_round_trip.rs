//! Build a distance archive, score it with a weight head, write both to disk
//! and read them back bit-exactly. Also shows how the reader reports damage.
//!
//! ```bash
//! cargo run -p rankalign --example archive_round_trip
//! ```

use rankalign::distx::{read_archive, write_archive, DistanceArchive};
use rankalign::model::{DistanceTensor, LayerSchema, LayerSpec, WeightHead};

fn main() -> rankalign::Result<()> {
    let schema = LayerSchema::new(vec![
        LayerSpec { name: "conv1".into(), channel_count: 3 },
        LayerSpec { name: "conv2".into(), channel_count: 2 },
    ])?;
    let mut archive = DistanceArchive::new(schema.clone());
    archive.insert(DistanceTensor::new("set0", "img0", vec![vec![0.1, 0.0, 0.4], vec![0.25, 0.05]])?)?;
    archive.insert(DistanceTensor::new("set0", "img1", vec![vec![0.3, 0.2, 0.1], vec![0.0, 0.5]])?)?;

    let head = WeightHead::new(schema, vec![vec![1.0, 0.5, 0.25], vec![2.0, 0.0]])?;
    for t in archive.iter() {
        println!("{}/{}: distance {:.4}", t.set_id, t.image_id, head.distance(t)?);
    }

    let dir = std::env::temp_dir().join(format!("rankalign-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir).expect("temporary directory");
    let (fdx, weights) = (dir.join("d.fdx"), dir.join("w.json"));
    write_archive(&archive, &fdx)?;
    head.save(&weights)?;
    assert_eq!(read_archive(&fdx)?, archive);
    assert_eq!(WeightHead::load(&weights)?, head);
    println!("round trip ok: {} bytes of archive, weights at {}", std::fs::metadata(&fdx).map_or(0, |m| m.len()), weights.display());

    let mut bytes = archive.to_bytes()?;
    bytes.truncate(bytes.len() - 3);
    if let Err(e) = DistanceArchive::from_bytes(&bytes) {
        println!("truncated archive: {e}");
    }
    let _ = std::fs::remove_dir_all(&dir);
    Ok(())
}
