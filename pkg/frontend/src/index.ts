export { encodeCldf, decodeCldf, featureBlockRange, CldfFormatError } from './cldf.js';
export type { CldfDataset, CldfDtype } from './cldf.js';
export { decodePng, crc32 } from './png.js';
export { decodePnm } from './pnm.js';
export { decodeImage, loadImage, resizeBilinear, IMAGE_EXTENSIONS } from './image.js';
export { ImageDecodeError } from './raster.js';
export type { DecodedImage } from './raster.js';
export { getBackbone, BACKBONE_DIMS } from './backbone.js';
export type { Backbone, BackboneTag } from './backbone.js';
export { exportFeatures, ExportError } from './exporter.js';
export type { ExportJob, ExportResult, SkippedFile } from './exporter.js';
