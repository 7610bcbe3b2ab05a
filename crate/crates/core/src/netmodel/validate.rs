use super::{LayerKind, LayerSpec, NetworkSpec, Scheme};

/// Check graph structure, shape chain and scheme annotations. An empty
/// list means the spec is valid.
pub fn validate_spec(spec: &NetworkSpec) -> Vec<String> {
    let mut v = Vec::new();
    let layers = &spec.layers;
    if layers.is_empty() {
        v.push("network has no layers".to_string());
        return v;
    }

    let inputs: Vec<&LayerSpec> = layers.iter().filter(|l| l.kind == LayerKind::Input).collect();
    let outputs: Vec<&LayerSpec> = layers.iter().filter(|l| l.kind == LayerKind::Output).collect();
    if inputs.len() != 1 || layers[0].kind != LayerKind::Input {
        v.push("network needs exactly one input layer, at position 0".to_string());
    }
    if outputs.len() != 1 || layers[layers.len() - 1].kind != LayerKind::Output {
        v.push("network needs exactly one output layer, at the end".to_string());
    }
    if layers[0].out_spatial != spec.input_resolution {
        v.push(format!(
            "layer {}: input resolution {:?} differs from network resolution {:?}",
            layers[0].name, layers[0].out_spatial, spec.input_resolution
        ));
    }

    let consumers = spec.consumers();
    for (pos, l) in layers.iter().enumerate() {
        let here = |msg: String| format!("layer {} ({}): {msg}", l.name, l.id);
        if l.id != pos {
            v.push(here(format!("id does not match position {pos}")));
            continue;
        }
        if let Some(&bad) = l.inputs.iter().find(|&&i| i >= pos) {
            v.push(here(format!("input {bad} is not an earlier layer")));
            continue;
        }
        if l.kind != LayerKind::Output && consumers[pos].is_empty() {
            v.push(here("output is never consumed".to_string()));
        }
        let expected_inputs = match l.kind {
            LayerKind::Input => 0..=0,
            LayerKind::Add => 2..=usize::MAX,
            _ => 1..=1,
        };
        if !expected_inputs.contains(&l.inputs.len()) {
            v.push(here(format!("{:?} layer with {} inputs", l.kind, l.inputs.len())));
            continue;
        }
        if l.kind == LayerKind::Input {
            continue;
        }
        let src = &layers[l.inputs[0]];
        let (in_c, in_hw) = (src.channels, src.out_spatial);

        match l.kind {
            LayerKind::Conv | LayerKind::Fc | LayerKind::CyclicShuffle => {
                let Some(conv) = l.conv else {
                    v.push(here("missing conv spec".to_string()));
                    continue;
                };
                if let Err(e) = conv.validate() {
                    v.push(here(e.to_string()));
                    continue;
                }
                if conv.in_channels != in_c {
                    v.push(here(format!(
                        "conv expects {} input channels, producer has {in_c}",
                        conv.in_channels
                    )));
                }
                if conv.out_channels != l.channels {
                    v.push(here(format!(
                        "channels {} differ from conv output {}",
                        l.channels, conv.out_channels
                    )));
                }
                if conv.weight_bits == 0 || conv.act_bits == 0 {
                    v.push(here("bit-widths must be >= 1".to_string()));
                }
                let expect = [conv.out_extent(in_hw[0]), conv.out_extent(in_hw[1])];
                if expect != [Some(l.out_spatial[0]), Some(l.out_spatial[1])] {
                    v.push(here(format!(
                        "spatial {:?} inconsistent with input {:?} and stride {}",
                        l.out_spatial, in_hw, conv.stride
                    )));
                }
                if l.kind == LayerKind::CyclicShuffle
                    && (conv.kernel != 1 || conv.stride != 1 || conv.in_channels != conv.out_channels)
                {
                    v.push(here("cyclic shuffle conv must be 1x1, stride 1, C -> C".to_string()));
                }
            }
            LayerKind::Pool => match l.pool {
                None => v.push(here("missing pool spec".to_string())),
                Some(p) => {
                    let expect = [p.out_extent(in_hw[0]), p.out_extent(in_hw[1])];
                    if expect != [Some(l.out_spatial[0]), Some(l.out_spatial[1])] {
                        v.push(here(format!(
                            "spatial {:?} inconsistent with pooled input {:?}",
                            l.out_spatial, in_hw
                        )));
                    }
                    if l.channels != in_c {
                        v.push(here("pooling changes channel count".to_string()));
                    }
                }
            },
            LayerKind::ChannelShuffle => {
                match l.groups {
                    Some(g) if g >= 1 && in_c % g == 0 => {}
                    other => v.push(here(format!("invalid shuffle groups {other:?} for {in_c} channels"))),
                }
                if l.channels != in_c || l.out_spatial != in_hw {
                    v.push(here("shuffle must preserve shape".to_string()));
                }
            }
            LayerKind::Add => {
                for &i in &l.inputs {
                    let s = &layers[i];
                    if s.channels != l.channels || s.out_spatial != l.out_spatial {
                        v.push(here(format!(
                            "operand {} has shape {}x{:?}, expected {}x{:?}",
                            s.name, s.channels, s.out_spatial, l.channels, l.out_spatial
                        )));
                    }
                }
            }
            LayerKind::Output => {
                if l.channels != in_c || l.out_spatial != in_hw {
                    v.push(here("output must mirror its producer".to_string()));
                }
            }
            LayerKind::Input => unreachable!(),
        }
    }

    v.extend(check_scheme(spec, &consumers));
    v
}

fn check_scheme(spec: &NetworkSpec, consumers: &[Vec<usize>]) -> Vec<String> {
    let mut v = Vec::new();
    for l in spec.layers.iter().filter(|l| l.has_conv()) {
        let Some(conv) = l.conv else { continue };
        match spec.scheme {
            Scheme::FullPrecision => {}
            Scheme::Uniform { b_a, b_w } => {
                if (conv.act_bits, conv.weight_bits) != (b_a, b_w) {
                    v.push(format!(
                        "layer {}: annotated {}/{} bits under a {b_a}/{b_w} scheme",
                        l.name, conv.act_bits, conv.weight_bits
                    ));
                }
            }
            Scheme::PalQuant { limb_bits, groups } => {
                if l.quantized && l.kind != LayerKind::Fc && conv.groups != groups {
                    v.push(format!(
                        "layer {}: quantized conv has {} groups, scheme needs {groups}",
                        l.name, conv.groups
                    ));
                }
                if l.quantized && (conv.act_bits, conv.weight_bits) != (limb_bits, limb_bits) {
                    v.push(format!(
                        "layer {}: quantized conv at {}/{} bits, scheme needs {limb_bits}",
                        l.name, conv.act_bits, conv.weight_bits
                    ));
                }
            }
        }
    }
    if !matches!(spec.scheme, Scheme::PalQuant { .. }) {
        if let Some(l) = spec.layers.iter().find(|l| l.kind == LayerKind::CyclicShuffle) {
            v.push(format!("layer {}: cyclic shuffle outside a PalQuant network", l.name));
        }
    }
    for l in spec.layers.iter().filter(|l| l.kind == LayerKind::CyclicShuffle) {
        // a module sits where one stage hands over to the next
        let Some(&src) = l.inputs.first() else { continue };
        let from = spec.layers.get(src).map(|s| s.stage);
        let feeds_own_stage = consumers[l.id]
            .iter()
            .all(|&c| spec.layers[c].stage == l.stage);
        if from.is_none_or(|s| s >= l.stage) || !feeds_own_stage {
            v.push(format!("layer {}: cyclic shuffle not at a stage start", l.name));
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::{build_network, palquant_transform, Arch};

    #[test]
    fn fresh_networks_are_valid() {
        for arch in [Arch::ResNet18, Arch::ResNet34, Arch::Plain18] {
            assert_eq!(validate_spec(&build_network(arch)), Vec::<String>::new());
        }
    }

    #[test]
    fn ungrouped_block_conv_is_flagged() {
        let mut net = palquant_transform(&build_network(Arch::ResNet18), 2, 2).unwrap();
        let idx = net.layers.iter().position(|l| l.name == "s1.b0.conv2").unwrap();
        let conv = net.layers[idx].conv.as_mut().unwrap();
        // keep the shape chain intact, break only the grouping
        conv.groups = 1;
        let v = validate_spec(&net);
        assert_eq!(v.len(), 1, "{v:?}");
        assert!(v[0].contains("s1.b0.conv2"));
    }

    #[test]
    fn spatial_mismatch_names_layer() {
        let mut net = build_network(Arch::ResNet18);
        let idx = net.layers.iter().position(|l| l.name == "s2.b1.conv1").unwrap();
        net.layers[idx].out_spatial = [27, 27];
        let v = validate_spec(&net);
        // the conv itself and its consumer both see the bad extent
        assert!(v.iter().any(|m| m.contains("s2.b1.conv1") && m.contains("spatial")));
        let mut net = build_network(Arch::ResNet18);
        let idx = net.layers.iter().position(|l| l.name == "s2.b0.conv2").unwrap();
        net.layers[idx].conv.as_mut().unwrap().stride = 2;
        let v = validate_spec(&net);
        assert_eq!(v.len(), 1, "{v:?}");
        assert!(v[0].contains("s2.b0.conv2"));
    }

    #[test]
    fn structural_errors() {
        let mut net = build_network(Arch::ResNet18);
        net.layers[5].inputs = vec![7];
        assert!(!validate_spec(&net).is_empty());
        let mut net = build_network(Arch::ResNet18);
        net.layers.pop();
        assert!(validate_spec(&net).iter().any(|m| m.contains("output")));
    }
}
