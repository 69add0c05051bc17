import { ApiClient } from "./api";
import { mountPlayground } from "./app";
import "./style.css";

const api = new URLSearchParams(location.search).get("api") ?? "http://127.0.0.1:8080";
void mountPlayground(document.getElementById("app")!, new ApiClient(api), localStorage);
