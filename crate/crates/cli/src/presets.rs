//! Named encoder configurations.

use fourier_pe::encoders::{parse_spec, EncoderSpec};

pub struct Preset {
    pub name: &'static str,
    pub provenance: &'static str,
    /// Config-file text.
    pub config: &'static str,
}

impl Preset {
    pub fn spec(&self) -> EncoderSpec {
        parse_spec(self.config).unwrap_or_else(|e| panic!("preset {} is invalid: {e}", self.name))
    }
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "reformer-s41",
        provenance: "Reformer image generation, main text: |F|=384, |H|=32, D=768; gamma=1 and LayerNorm before each dense layer from the appendix",
        config: "kind = learnable-fourier\ngroups = 1\ncoords_per_group = 2\nfourier_dim = 384\nhidden_dim = 32\nencoding_dim = 768\ngamma = 1\ninit = normal\nlayer_norm = on\n",
    },
    Preset {
        name: "reformer-apxD",
        provenance: "Reformer image generation, appendix: |F|=768, |H|=32, D=768, gamma=1, LayerNorm on; conflicts with the main text's |F|=384",
        config: "kind = learnable-fourier\ngroups = 1\ncoords_per_group = 2\nfourier_dim = 768\nhidden_dim = 32\nencoding_dim = 768\ngamma = 1\ninit = normal\nlayer_norm = on\n",
    },
    Preset {
        name: "detr",
        provenance: "DETR object detection: gamma=1, 2x256 dense MLP with GeLU; |F|=256 is not stated and chosen to match the model width",
        config: "kind = learnable-fourier\ngroups = 1\ncoords_per_group = 2\nfourier_dim = 256\nhidden_dim = 256\nencoding_dim = 256\ngamma = 1\ninit = normal\n",
    },
    Preset {
        name: "widget-1-4",
        provenance: "Widget captioning, G/M = 1/4: |F|=128, gamma=100, 20% dropout after the activation; |H|=64 and D=128 (screen encoder width) are not stated",
        config: "kind = learnable-fourier\ngroups = 1\ncoords_per_group = 4\nfourier_dim = 128\nhidden_dim = 64\nencoding_dim = 128\ngamma = 100\ninit = normal\ndropout = 0.2\n",
    },
    Preset {
        name: "widget-2-2",
        provenance: "Widget captioning, G/M = 2/2: |F|=64, gamma=100, 20% dropout after the activation; |H|=64 and D=128 (screen encoder width) are not stated",
        config: "kind = learnable-fourier\ngroups = 2\ncoords_per_group = 2\nfourier_dim = 64\nhidden_dim = 64\nencoding_dim = 128\ngamma = 100\ninit = normal\ndropout = 0.2\n",
    },
    Preset {
        name: "widget-4-1",
        provenance: "Widget captioning, G/M = 4/1: |F|=32, gamma=100, 20% dropout after the activation; |H|=64 and D=128 (screen encoder width) are not stated",
        config: "kind = learnable-fourier\ngroups = 4\ncoords_per_group = 1\nfourier_dim = 32\nhidden_dim = 64\nencoding_dim = 128\ngamma = 100\ninit = normal\ndropout = 0.2\n",
    },
    Preset {
        name: "sine-1d",
        provenance: "Transformer sinusoid over the flattened 64x64 raster index, D=768",
        config: "kind = sine-1d\nencoding_dim = 768\n",
    },
    Preset {
        name: "sine-2d",
        provenance: "Per-axis sinusoids concatenated, 384 dims per axis, D=768",
        config: "kind = sine-concat\nencoding_dim = 768\ncoords = 2\n",
    },
    Preset {
        name: "sine-4d",
        provenance: "Per-coordinate sinusoids for a bounding box, 32 dims per coordinate, D=128, raw coordinate values",
        config: "kind = sine-concat\nencoding_dim = 128\ncoords = 4\n",
    },
    Preset {
        name: "md-sine",
        provenance: "Sinusoid of a linear combination of both coordinates with per-axis bases 10000 and 5000, D=768",
        config: "kind = md-sine\nencoding_dim = 768\n",
    },
    Preset {
        name: "embed-2d",
        provenance: "Reformer default: vertical [64, 384] and horizontal [64, 384] tables concatenated",
        config: "kind = embed\nvocab = 64,64\nwidths = 384,384\ninit_std = 1\n",
    },
    Preset {
        name: "embed-1d",
        provenance: "One learned vector per flattened position, table [64x64, 768]",
        config: "kind = embed\nvocab = 4096\nwidths = 768\ninit_std = 1\n",
    },
    Preset {
        name: "embed-4d",
        provenance: "One table per bounding-box coordinate; vocabulary 100 and width 32 per coordinate are not stated",
        config: "kind = embed\nvocab = 100,100,100,100\nwidths = 32,32,32,32\ninit_std = 1\n",
    },
    Preset {
        name: "mlp",
        provenance: "MLP alone on the raw 2-D position, |H|=32, D=768, LayerNorm on (ablation baseline)",
        config: "kind = mlp\ngroups = 1\ncoords_per_group = 2\nhidden_dim = 32\nencoding_dim = 768\nlayer_norm = on\n",
    },
    Preset {
        name: "fit-fourier",
        provenance: "Small learnable encoder for kernel fitting on an 8x8 lattice",
        config: "kind = learnable-fourier\ngroups = 1\ncoords_per_group = 2\nfourier_dim = 8\nhidden_dim = 8\nencoding_dim = 8\ngamma = 1\ninit = normal\n",
    },
    Preset {
        name: "fit-fixed-fourier",
        provenance: "fit-fourier with W_r frozen at initialization",
        config: "kind = fixed-fourier\ngroups = 1\ncoords_per_group = 2\nfourier_dim = 8\nhidden_dim = 8\nencoding_dim = 8\ngamma = 1\ninit = normal\n",
    },
    Preset {
        name: "toy-fourier",
        provenance: "Learnable-Fourier+MLP for the 8x8 retrieval toy",
        config: "kind = learnable-fourier\ngroups = 1\ncoords_per_group = 2\nfourier_dim = 64\nhidden_dim = 32\nencoding_dim = 16\ngamma = 2\ninit = normal\n",
    },
    Preset {
        name: "toy-fixed-fourier",
        provenance: "toy-fourier with W_r frozen at initialization",
        config: "kind = fixed-fourier\ngroups = 1\ncoords_per_group = 2\nfourier_dim = 64\nhidden_dim = 32\nencoding_dim = 16\ngamma = 2\ninit = normal\n",
    },
    Preset {
        name: "toy-embed",
        provenance: "Embed-2D over the full 8x8 retrieval grid, 8 dims per axis",
        config: "kind = embed\nvocab = 8,8\nwidths = 8,8\ninit_std = 0.1\n",
    },
    Preset {
        name: "toy-zero",
        provenance: "No positional information (all-zero encoding), retrieval control",
        config: "kind = zero\ninput_width = 2\nencoding_dim = 16\n",
    },
];

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}
