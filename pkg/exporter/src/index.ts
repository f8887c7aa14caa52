export {
  convertModel,
  UnsupportedModelError,
  type ConversionResult,
  type DenseLayerDoc,
  type LayerDoc,
  type LayerMapping,
  type LstmLayerDoc,
  type WeightFileDoc,
} from "./convert.js";
export { exportModel, manifestPath, type ExportManifest } from "./export.js";
export { fileIOHandler } from "./io.js";
