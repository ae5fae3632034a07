export * from "./types.js";
export * from "./treeView.js";
export * from "./views.js";
export * from "./chartView.js";
export * from "./api.js";
